#include "flowreg/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "raw payloads are little-endian; big-endian hosts need swapping");

namespace flowreg {

namespace {

int next_pgm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {  // comment to end of line
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return 1;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok.empty() ? 0 : 1;
}

long parse_pgm_int(std::istream& in, const std::string& path, const char* what) {
    std::string tok;
    if (!next_pgm_token(in, tok))
        throw IoError(IoFault::malformed_header, path + ": missing " + what);
    try {
        std::size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(IoFault::malformed_header, path + ": bad " + std::string(what) + " '" +
                                                     tok + "'");
    }
}

}  // namespace

Image read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoFault::open_failed, "cannot open " + path);

    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '2'))
        throw IoError(IoFault::malformed_header, path + ": not a P5/P2 PGM file");
    const bool binary = magic[1] == '5';

    const long width = parse_pgm_int(in, path, "width");
    const long height = parse_pgm_int(in, path, "height");
    const long maxval = parse_pgm_int(in, path, "maxval");
    if (width < 2 || height < 2)
        throw IoError(IoFault::malformed_header, path + ": extents must be >= 2");
    if (maxval < 1 || maxval > 65535)
        throw IoError(IoFault::malformed_header, path + ": maxval out of range");

    Image img = make_image(GridShape{{static_cast<int>(height), static_cast<int>(width)}});
    const std::size_t n = img.values.size();
    const double scale = 1.0 / static_cast<double>(maxval);

    if (binary) {
        // single whitespace byte separates the header from the payload
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(n * static_cast<std::size_t>(bytes));
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw IoError(IoFault::truncated_payload, path + ": truncated pixel payload");
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = bytes == 1
                                   ? buf[i]
                                   : (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
            if (v > static_cast<unsigned>(maxval))
                throw IoError(IoFault::format_mismatch,
                              path + ": sample exceeds declared maxval");
            img.values[i] = static_cast<double>(v) * scale;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            long v;
            try {
                v = parse_pgm_int(in, path, "sample");
            } catch (const IoError& e) {
                if (e.fault() == IoFault::malformed_header)
                    throw IoError(IoFault::truncated_payload,
                                  path + ": truncated ASCII payload");
                throw;
            }
            if (v < 0 || v > maxval)
                throw IoError(IoFault::format_mismatch, path + ": sample out of range");
            img.values[i] = static_cast<double>(v) * scale;
        }
    }
    return img;
}

void write_pgm(const std::string& path, const Image& image, int maxval, bool binary) {
    if (image.shape.dim() != 2) throw ShapeError("PGM supports 2D images only");
    if (maxval != 255 && maxval != 65535) throw ParamError("PGM maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoFault::open_failed, "cannot open " + path + " for writing");

    const int H = image.shape.extents[0], W = image.shape.extents[1];
    out << (binary ? "P5" : "P2") << "\n" << W << " " << H << "\n" << maxval << "\n";
    auto quantize = [&](double v) {
        const double c = std::clamp(v, 0.0, 1.0);
        return static_cast<unsigned>(std::lround(c * maxval));
    };
    if (binary) {
        std::vector<unsigned char> buf;
        buf.reserve(image.values.size() * (maxval > 255 ? 2 : 1));
        for (double v : image.values) {
            const unsigned q = quantize(v);
            if (maxval > 255) buf.push_back(static_cast<unsigned char>(q >> 8));
            buf.push_back(static_cast<unsigned char>(q & 0xff));
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    } else {
        for (std::size_t i = 0; i < image.values.size(); ++i) {
            out << quantize(image.values[i]);
            out << (((i + 1) % static_cast<std::size_t>(W)) == 0 ? '\n' : ' ');
        }
    }
    if (!out) throw IoError(IoFault::open_failed, "write failed for " + path);
}

std::string sidecar_path(const std::string& raw_path) {
    std::filesystem::path p(raw_path);
    p.replace_extension(".json");
    return p.string();
}

namespace {

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    if (dtype == "u16") return 2;
    throw IoError(IoFault::malformed_header, "unknown dtype '" + dtype + "'");
}

void write_sidecar(const std::string& raw_path, const ArrayInfo& info) {
    nlohmann::json j = info.extra.is_object() ? info.extra : nlohmann::json::object();
    j["shape"] = info.shape.extents;
    j["channels"] = info.channels;
    j["dtype"] = info.dtype;
    j["order"] = "row-major";
    std::ofstream out(sidecar_path(raw_path));
    if (!out) throw IoError(IoFault::open_failed, "cannot open " + sidecar_path(raw_path));
    out << j.dump(2) << "\n";
    if (!out) throw IoError(IoFault::open_failed, "write failed for " + sidecar_path(raw_path));
}

void write_payload(const std::string& raw_path, const void* data, std::size_t bytes) {
    std::ofstream out(raw_path, std::ios::binary);
    if (!out) throw IoError(IoFault::open_failed, "cannot open " + raw_path + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError(IoFault::open_failed, "write failed for " + raw_path);
}

}  // namespace

void write_array(const std::string& raw_path, const ArrayInfo& info,
                 const std::vector<double>& data) {
    validate_shape(info.shape);
    const std::size_t expect =
        static_cast<std::size_t>(info.shape.voxels()) * static_cast<std::size_t>(info.channels);
    if (data.size() != expect)
        throw ShapeError("payload size does not match shape/channels");
    if (info.dtype == "f64") {
        write_sidecar(raw_path, info);
        write_payload(raw_path, data.data(), data.size() * 8);
    } else if (info.dtype == "f32") {
        std::vector<float> f(data.begin(), data.end());
        write_sidecar(raw_path, info);
        write_payload(raw_path, f.data(), f.size() * 4);
    } else {
        throw ParamError("write_array handles f32/f64; use write_array_u16 for labels");
    }
}

void write_array_u16(const std::string& raw_path, const ArrayInfo& info,
                     const std::vector<std::uint16_t>& data) {
    validate_shape(info.shape);
    const std::size_t expect =
        static_cast<std::size_t>(info.shape.voxels()) * static_cast<std::size_t>(info.channels);
    if (data.size() != expect) throw ShapeError("payload size does not match shape/channels");
    if (info.dtype != "u16") throw ParamError("u16 writer needs dtype u16");
    write_sidecar(raw_path, info);
    write_payload(raw_path, data.data(), data.size() * 2);
}

ArrayData read_array(const std::string& raw_path) {
    const std::string side = sidecar_path(raw_path);
    std::ifstream sin(side);
    if (!sin) throw IoError(IoFault::open_failed, "cannot open sidecar " + side);
    nlohmann::json j;
    try {
        sin >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoFault::malformed_header, side + ": invalid JSON: " + e.what());
    }

    ArrayData out;
    try {
        out.info.shape.extents = j.at("shape").get<std::vector<int>>();
        out.info.channels = j.at("channels").get<int>();
        out.info.dtype = j.at("dtype").get<std::string>();
        if (j.at("order").get<std::string>() != "row-major")
            throw IoError(IoFault::malformed_header, side + ": unsupported order");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoFault::malformed_header, side + ": missing field: " + e.what());
    }
    out.info.extra = j;
    out.info.extra.erase("shape");
    out.info.extra.erase("channels");
    out.info.extra.erase("dtype");
    out.info.extra.erase("order");

    try {
        validate_shape(out.info.shape);
    } catch (const ShapeError& e) {
        throw IoError(IoFault::malformed_header, side + ": " + e.what());
    }
    if (out.info.channels < 1)
        throw IoError(IoFault::malformed_header, side + ": channels must be >= 1");

    std::ifstream in(raw_path, std::ios::binary);
    if (!in) throw IoError(IoFault::open_failed, "cannot open " + raw_path);
    in.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);

    const std::size_t count = static_cast<std::size_t>(out.info.shape.voxels()) *
                              static_cast<std::size_t>(out.info.channels);
    const std::size_t expect = count * dtype_size(out.info.dtype);
    if (bytes < expect)
        throw IoError(IoFault::truncated_payload,
                      raw_path + ": payload has " + std::to_string(bytes) + " bytes, expected " +
                          std::to_string(expect));
    if (bytes > expect)
        throw IoError(IoFault::format_mismatch,
                      raw_path + ": payload larger than the declared shape");

    std::vector<char> buf(bytes);
    in.read(buf.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw IoError(IoFault::truncated_payload, raw_path + ": short read");

    if (out.info.dtype == "u16") {
        out.words.resize(count);
        std::memcpy(out.words.data(), buf.data(), bytes);
    } else if (out.info.dtype == "f32") {
        std::vector<float> f(count);
        std::memcpy(f.data(), buf.data(), bytes);
        out.values.assign(f.begin(), f.end());
    } else {
        out.values.resize(count);
        std::memcpy(out.values.data(), buf.data(), bytes);
    }
    if (!out.values.empty() && !all_finite(out.values))
        throw IoError(IoFault::format_mismatch, raw_path + ": non-finite values in payload");
    return out;
}

namespace {

bool has_extension(const std::string& path, const char* ext) {
    return std::filesystem::path(path).extension() == ext;
}

}  // namespace

Image read_image(const std::string& path) {
    if (has_extension(path, ".pgm")) return read_pgm(path);
    ArrayData a = read_array(path);
    if (a.info.channels != 1 || (a.info.dtype != "f32" && a.info.dtype != "f64"))
        throw IoError(IoFault::format_mismatch,
                      path + ": images need one f32/f64 channel, got " +
                          std::to_string(a.info.channels) + " x " + a.info.dtype);
    return Image{a.info.shape, std::move(a.values)};
}

void write_image(const std::string& path, const Image& image) {
    if (has_extension(path, ".pgm")) {
        write_pgm(path, image);
        return;
    }
    write_array(path, ArrayInfo{image.shape, 1, "f64", {}}, image.values);
}

VoxelCloud read_cloud(const std::string& path) {
    ArrayData a = read_array(path);
    if (a.info.channels != a.info.shape.dim() ||
        (a.info.dtype != "f32" && a.info.dtype != "f64"))
        throw IoError(IoFault::format_mismatch,
                      path + ": clouds need dim f32/f64 channels");
    return VoxelCloud{a.info.shape, std::move(a.values)};
}

void write_cloud(const std::string& path, const VoxelCloud& cloud) {
    write_array(path, ArrayInfo{cloud.shape, cloud.shape.dim(), "f64", {}}, cloud.coords);
}

LabelMap read_labels(const std::string& path) {
    ArrayData a = read_array(path);
    if (a.info.channels != 1 || a.info.dtype != "u16")
        throw IoError(IoFault::format_mismatch, path + ": label maps need one u16 channel");
    return LabelMap{a.info.shape, std::move(a.words)};
}

void write_labels(const std::string& path, const LabelMap& labels) {
    write_array_u16(path, ArrayInfo{labels.shape, 1, "u16", {}}, labels.labels);
}

void write_jacobian(const std::string& path, const JacobianMap& map) {
    write_array(path, ArrayInfo{map.shape, 1, "f64", {}}, map.dets);
}

void write_params(const std::string& path, const std::vector<double>& theta,
                  const nlohmann::json& descriptor) {
    nlohmann::json extra;
    extra["model"] = descriptor;
    ArrayInfo info;
    // parameters are a flat vector; store as a 1 x P grid
    info.shape = GridShape{{1, static_cast<int>(theta.size())}};
    info.channels = 1;
    info.dtype = "f64";
    info.extra = extra;
    // bypass the >=2 extent rule for the degenerate parameter strip
    nlohmann::json j = extra;
    j["shape"] = info.shape.extents;
    j["channels"] = 1;
    j["dtype"] = "f64";
    j["order"] = "row-major";
    std::ofstream side(sidecar_path(path));
    if (!side) throw IoError(IoFault::open_failed, "cannot open " + sidecar_path(path));
    side << j.dump(2) << "\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoFault::open_failed, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(theta.size() * 8));
    if (!out) throw IoError(IoFault::open_failed, "write failed for " + path);
}

ParamsData read_params(const std::string& path) {
    const std::string side = sidecar_path(path);
    std::ifstream sin(side);
    if (!sin) throw IoError(IoFault::open_failed, "cannot open sidecar " + side);
    nlohmann::json j;
    try {
        sin >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoFault::malformed_header, side + ": invalid JSON: " + e.what());
    }
    if (!j.contains("model"))
        throw IoError(IoFault::malformed_header, side + ": missing model descriptor");
    std::vector<int> shape;
    try {
        shape = j.at("shape").get<std::vector<int>>();
        if (j.at("dtype").get<std::string>() != "f64")
            throw IoError(IoFault::format_mismatch, path + ": parameters must be f64");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoFault::malformed_header, side + ": missing field: " + e.what());
    }
    std::size_t count = 1;
    for (int e : shape) count *= static_cast<std::size_t>(e);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoFault::open_failed, "cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes != count * 8)
        throw IoError(bytes < count * 8 ? IoFault::truncated_payload : IoFault::format_mismatch,
                      path + ": payload size mismatch");
    ParamsData out;
    out.theta.resize(count);
    in.read(reinterpret_cast<char*>(out.theta.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw IoError(IoFault::truncated_payload, path + ": short read");
    out.descriptor = j.at("model");
    return out;
}

}  // namespace flowreg
