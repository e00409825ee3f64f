#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flowreg/types.hpp"

namespace flowreg {

// --- PGM (P5 binary / P2 ASCII, maxval 255 or 65535) -----------------------
// Intensities map linearly to [0,1] on read; writes quantize with rounding.

Image read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Image& image, int maxval = 255,
               bool binary = true);

// --- Raw array format -------------------------------------------------------
// Two files: a JSON sidecar {"shape":[...],"channels":k,"dtype":...,
// "order":"row-major"} next to a little-endian binary payload. The sidecar
// path is the payload path with its extension replaced by ".json". Cloud
// channels are coordinate components in the axis order of "shape".

struct ArrayInfo {
    GridShape shape;
    int channels = 1;
    std::string dtype;  // "f32" | "f64" | "u16"
    nlohmann::json extra;  // any additional sidecar fields (round-tripped)
};

std::string sidecar_path(const std::string& raw_path);

void write_array(const std::string& raw_path, const ArrayInfo& info,
                 const std::vector<double>& data);
void write_array_u16(const std::string& raw_path, const ArrayInfo& info,
                     const std::vector<std::uint16_t>& data);

struct ArrayData {
    ArrayInfo info;
    std::vector<double> values;        // filled for f32/f64 payloads
    std::vector<std::uint16_t> words;  // filled for u16 payloads
};

ArrayData read_array(const std::string& raw_path);

// --- Typed helpers ----------------------------------------------------------
// read_image/write_image dispatch on the extension: .pgm for 2D grayscale,
// anything else uses the raw array format.

Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& image);

VoxelCloud read_cloud(const std::string& path);
void write_cloud(const std::string& path, const VoxelCloud& cloud);

LabelMap read_labels(const std::string& path);
void write_labels(const std::string& path, const LabelMap& labels);

void write_jacobian(const std::string& path, const JacobianMap& map);

// Model parameters with the architecture descriptor embedded in the sidecar.
void write_params(const std::string& path, const std::vector<double>& theta,
                  const nlohmann::json& descriptor);
struct ParamsData {
    std::vector<double> theta;
    nlohmann::json descriptor;
};
ParamsData read_params(const std::string& path);

}  // namespace flowreg
