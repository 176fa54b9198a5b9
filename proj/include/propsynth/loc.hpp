#pragma once

#include <cstdint>

namespace propsynth {

// Locality lattice: no-pairing < one-to-one < many-to-one < all-to-one.
// Together with loc_add/loc_mul this forms a commutative semiring
// (additive identity X, multiplicative identity O, annihilator X).
enum class Loc : std::uint8_t { X = 0, O = 1, M = 2, A = 3 };

constexpr Loc loc_add(Loc y, Loc z) { return y < z ? z : y; }

constexpr Loc loc_mul(Loc y, Loc z) {
  if (y == Loc::X || z == Loc::X) return Loc::X;
  if (y == Loc::A || z == Loc::A) return Loc::A;
  if (y == Loc::M || z == Loc::M) return Loc::M;
  return Loc::O;
}

constexpr const char* loc_glyph(Loc l) {
  switch (l) {
    case Loc::X: return "×";       // ×
    case Loc::O: return "○";       // ○
    case Loc::M: return "◑";       // ◑
    case Loc::A: return "●";       // ●
  }
  return "?";
}

constexpr char loc_letter(Loc l) {
  switch (l) {
    case Loc::X: return 'x';
    case Loc::O: return 'o';
    case Loc::M: return 'm';
    case Loc::A: return 'a';
  }
  return '?';
}

constexpr bool loc_from_letter(char c, Loc& out) {
  switch (c) {
    case 'x': out = Loc::X; return true;
    case 'o': out = Loc::O; return true;
    case 'm': out = Loc::M; return true;
    case 'a': out = Loc::A; return true;
  }
  return false;
}

// Locality class of an output element whose preimage covers `covered` of the
// `extent` positions along an input dimension. A single covered position is
// one-to-one even when the dimension itself has extent 1.
constexpr Loc loc_of_coverage(std::int64_t covered, std::int64_t extent) {
  if (covered <= 1) return Loc::O;
  if (covered >= extent) return Loc::A;
  return Loc::M;
}

}  // namespace propsynth
