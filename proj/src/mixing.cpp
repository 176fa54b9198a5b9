#include "propsynth/mixing.hpp"

#include <sstream>
#include <stdexcept>

namespace propsynth {

MixingMatrix mix_compose(const MixingMatrix& q, const MixingMatrix& u) {
  if (q.cols() != u.rows())
    throw std::invalid_argument("mix_compose: inner dimensions disagree (" +
                                std::to_string(q.cols()) + " vs " + std::to_string(u.rows()) + ")");
  MixingMatrix r(q.rows(), u.cols());
  for (int o = 0; o < q.rows(); ++o) {
    for (int i = 0; i < u.cols(); ++i) {
      Loc acc = Loc::X;
      for (int k = 0; k < q.cols(); ++k) acc = loc_add(acc, loc_mul(q.at(o, k), u.at(k, i)));
      r.at(o, i) = acc;
    }
  }
  return r;
}

std::int64_t mixing_deficit(const MixingMatrix& u, const MixingMatrix& v) {
  std::int64_t n = 0;
  for (int r = 0; r < u.rows(); ++r)
    for (int c = 0; c < u.cols(); ++c)
      if (v.at(r, c) > u.at(r, c)) ++n;
  return n;
}

bool MixingMatrix::from_letters(const std::string& s, MixingMatrix& out) {
  std::vector<std::string> rows;
  std::string cur;
  for (char c : s) {
    if (c == '|') {
      rows.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  rows.push_back(cur);
  if (rows.empty() || rows[0].empty()) return false;
  const int nc = static_cast<int>(rows[0].size());
  MixingMatrix m(static_cast<int>(rows.size()), nc);
  for (int r = 0; r < m.rows(); ++r) {
    if (static_cast<int>(rows[r].size()) != nc) return false;
    for (int c = 0; c < nc; ++c) {
      Loc l;
      if (!loc_from_letter(rows[r][c], l)) return false;
      m.at(r, c) = l;
    }
  }
  out = m;
  return true;
}

std::vector<std::string> dim_labels(int rank) {
  std::vector<std::string> labels(static_cast<std::size_t>(rank));
  if (rank >= 1) labels[0] = "B";
  if (rank >= 2) labels[static_cast<std::size_t>(rank) - 1] = "C";
  static const char* kSpatial[] = {"H", "W", "D3", "D4", "D5", "D6"};
  for (int i = 1; i + 1 < rank; ++i)
    labels[static_cast<std::size_t>(i)] = i - 1 < 6 ? kSpatial[i - 1] : "D" + std::to_string(i);
  return labels;
}

std::string MixingMatrix::render(const std::vector<std::string>& out_labels,
                                 const std::vector<std::string>& in_labels) const {
  std::ostringstream os;
  os << "        In\n";
  os << "       ";
  for (const auto& l : in_labels) os << " " << l << " ";
  os << "\n";
  for (int r = 0; r < rows_; ++r) {
    os << (r == rows_ / 2 ? "Out " : "    ");
    os << (r < static_cast<int>(out_labels.size()) ? out_labels[static_cast<std::size_t>(r)] : "?") << "  ";
    for (int c = 0; c < cols_; ++c) os << " " << loc_glyph(at(r, c)) << " ";
    os << "\n";
  }
  return os.str();
}

std::string MixingMatrix::render() const { return render(dim_labels(rows_), dim_labels(cols_)); }

}  // namespace propsynth
