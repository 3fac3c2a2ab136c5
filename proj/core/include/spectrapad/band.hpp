#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace spectrapad {

/// One of the five NIR acquisition wavelengths. Enumerators carry the
/// wavelength in nm; canonical order is ascending.
enum class SpectralBand : int { k800 = 800, k830 = 830, k850 = 850, k870 = 870, k980 = 980 };

inline constexpr std::size_t kNumBands = 5;
inline constexpr std::array<SpectralBand, kNumBands> kAllBands = {
    SpectralBand::k800, SpectralBand::k830, SpectralBand::k850, SpectralBand::k870, SpectralBand::k980};

constexpr int wavelength_nm(SpectralBand b) { return static_cast<int>(b); }

constexpr std::size_t band_index(SpectralBand b) {
  switch (b) {
    case SpectralBand::k800: return 0;
    case SpectralBand::k830: return 1;
    case SpectralBand::k850: return 2;
    case SpectralBand::k870: return 3;
    case SpectralBand::k980: return 4;
  }
  return 0;
}

constexpr std::optional<SpectralBand> band_from_nm(int nm) {
  for (auto b : kAllBands)
    if (wavelength_nm(b) == nm) return b;
  return std::nullopt;
}

inline std::string band_name(SpectralBand b) { return std::to_string(wavelength_nm(b)); }

/// Small value-type set of bands, iterated in canonical order.
class BandSet {
 public:
  constexpr BandSet() = default;
  constexpr BandSet(std::initializer_list<SpectralBand> bands) {
    for (auto b : bands) insert(b);
  }

  static constexpr BandSet all() { return BandSet(0x1f); }

  constexpr bool contains(SpectralBand b) const { return (bits_ >> band_index(b)) & 1U; }
  constexpr void insert(SpectralBand b) { bits_ |= static_cast<std::uint8_t>(1U << band_index(b)); }
  constexpr void erase(SpectralBand b) { bits_ &= static_cast<std::uint8_t>(~(1U << band_index(b))); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const {
    std::size_t n = 0;
    for (std::uint8_t v = bits_; v; v &= static_cast<std::uint8_t>(v - 1)) ++n;
    return n;
  }
  constexpr BandSet intersect(BandSet o) const { return BandSet(bits_ & o.bits_); }
  constexpr bool subset_of(BandSet o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  std::vector<SpectralBand> bands() const {
    std::vector<SpectralBand> out;
    for (auto b : kAllBands)
      if (contains(b)) out.push_back(b);
    return out;
  }

  /// "800,850" style list.
  std::string to_string() const {
    std::string s;
    for (auto b : bands()) {
      if (!s.empty()) s += ',';
      s += band_name(b);
    }
    return s;
  }

  friend constexpr bool operator==(BandSet, BandSet) = default;

 private:
  constexpr explicit BandSet(unsigned bits) : bits_(static_cast<std::uint8_t>(bits & 0x1f)) {}
  std::uint8_t bits_ = 0;
};

/// Parses "800,850,980". Throws a config error on unknown wavelengths.
BandSet parse_band_list(const std::string& text);

template <class T>
using PerBand = std::array<T, kNumBands>;

}  // namespace spectrapad
