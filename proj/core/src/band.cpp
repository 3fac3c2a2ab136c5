#include "spectrapad/band.hpp"

#include <sstream>

#include "spectrapad/error.hpp"

namespace spectrapad {

BandSet parse_band_list(const std::string& text) {
  BandSet out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    item = item.substr(first, last - first + 1);
    int nm = 0;
    try {
      std::size_t used = 0;
      nm = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::kConfig, "band list: '" + item + "' is not a wavelength");
    }
    auto band = band_from_nm(nm);
    if (!band) fail(ErrorKind::kConfig, "band list: unknown wavelength " + item + " nm");
    out.insert(*band);
  }
  if (out.empty()) fail(ErrorKind::kConfig, "band list is empty");
  return out;
}

}  // namespace spectrapad
