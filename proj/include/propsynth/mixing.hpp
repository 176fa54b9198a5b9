#pragma once

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

#include "propsynth/loc.hpp"

namespace propsynth {

// Mixing property of a tensor-to-tensor map: rows are output dimensions,
// columns are input dimensions, entries are locality classes.
class MixingMatrix {
 public:
  MixingMatrix() = default;
  MixingMatrix(int rows, int cols, Loc fill = Loc::X)
      : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows) * cols, fill) {}

  static MixingMatrix identity(int n) {
    MixingMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = Loc::O;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Loc& at(int out_dim, int in_dim) { return e_[static_cast<std::size_t>(out_dim) * cols_ + in_dim]; }
  Loc at(int out_dim, int in_dim) const { return e_[static_cast<std::size_t>(out_dim) * cols_ + in_dim]; }

  bool same_dims(const MixingMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  // Entrywise partial order; false when dimensions differ.
  bool leq(const MixingMatrix& o) const {
    if (!same_dims(o)) return false;
    for (std::size_t i = 0; i < e_.size(); ++i)
      if (e_[i] > o.e_[i]) return false;
    return true;
  }

  bool operator==(const MixingMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && e_ == o.e_; }
  bool operator!=(const MixingMatrix& o) const { return !(*this == o); }

  friend MixingMatrix loc_add(const MixingMatrix& a, const MixingMatrix& b) {
    assert(a.same_dims(b));
    MixingMatrix r(a.rows_, a.cols_);
    for (std::size_t i = 0; i < r.e_.size(); ++i) r.e_[i] = propsynth::loc_add(a.e_[i], b.e_[i]);
    return r;
  }

  // Compact row-major letter encoding, e.g. "oxxa|xmxa|xxma|xxxa".
  std::string letters() const {
    std::string s;
    for (int r = 0; r < rows_; ++r) {
      if (r) s += '|';
      for (int c = 0; c < cols_; ++c) s += loc_letter(at(r, c));
    }
    return s;
  }

  static bool from_letters(const std::string& s, MixingMatrix& out);

  // Glyph table with dimension labels, matching the usual B/H/W/C layout.
  std::string render(const std::vector<std::string>& out_labels,
                     const std::vector<std::string>& in_labels) const;
  std::string render() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Loc> e_;
};

// Matrix product over the (loc_add, loc_mul) semiring: composing q after p
// yields mixing(q) * mixing(p).
MixingMatrix mix_compose(const MixingMatrix& q, const MixingMatrix& u);

// Count of entries where v exceeds u; used by the mixing distance.
std::int64_t mixing_deficit(const MixingMatrix& u, const MixingMatrix& v);

// Dimension labels for a rank-n tensor: B, H, W, ... , C.
std::vector<std::string> dim_labels(int rank);

}  // namespace propsynth
