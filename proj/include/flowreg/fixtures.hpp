#pragma once

#include <string>
#include <vector>

#include "flowreg/types.hpp"

namespace flowreg::demo {

// Procedurally drawn 64x64 registration pairs used by the demo subcommand
// and the test suites: a filled circle vs a donut, a square vs a cross, a
// two-blob pair, and a synthetic brain slice pair. Edges are slightly soft
// so intensity gradients exist off the contours.
struct DemoPair {
    std::string name;
    Image fixed;
    Image moving;
};

std::vector<std::string> pair_names();

DemoPair make_pair(const std::string& name, int size = 64);

}  // namespace flowreg::demo
