#pragma once

#include <memory>
#include <vector>

#include "strata/types.hpp"

namespace strata {

/// Entry access for a square operator to be compressed. Geometry-aware
/// sources can provide proxy surrogates so compression never touches all
/// N^2 entries; the default falls back to exact complement sampling.
class MatrixSource {
 public:
  virtual ~MatrixSource() = default;
  virtual int dim() const = 0;
  virtual CMat block(const std::vector<int>& rows, const std::vector<int>& cols) const = 0;
  /// Complement indices that must be sampled explicitly for this cluster.
  virtual std::vector<int> near_complement(const std::vector<int>& cluster) const;
  /// Extra surrogate columns (for row bases) / rows (for column bases).
  virtual CMat row_surrogate(const std::vector<int>& cluster) const { return CMat(cluster.size(), 0); }
  virtual CMat col_surrogate(const std::vector<int>& cluster) const { return CMat(0, cluster.size()); }
};

/// Plain dense-backed source (tests, fallback).
class DenseSource : public MatrixSource {
 public:
  explicit DenseSource(CMat m) : m_(std::move(m)) {}
  int dim() const override { return static_cast<int>(m_.rows()); }
  CMat block(const std::vector<int>& rows, const std::vector<int>& cols) const override {
    return m_(rows, cols);
  }

 private:
  CMat m_;
};

struct HbsNode {
  int begin = 0, end = 0;  // index range
  int child[2] = {-1, -1};
  int parent = -1;
  int level = 0;
  std::vector<int> row_skel, col_skel;        // global indices
  CMat u, w;                                  // row interp (n_loc x k), col interp (k x n_loc)
  CMat coupling_to_sibling;                   // A(row_skel, sibling col_skel)
  CMat d;                                     // local diagonal block (level matrix)
  Eigen::PartialPivLU<CMat> d_lu;
  CMat d_inv_u;                               // D^-1 U
  CMat d_hat;                                 // (W D^-1 U)^-1
  bool is_leaf() const { return child[0] < 0; }
};

class HbsMatrix {
 public:
  int dim() const { return n_; }
  bool dense_fallback() const { return dense_fallback_; }
  double tol() const { return tol_; }
  CVec apply(const CVec& x) const;

 private:
  friend HbsMatrix hbs_compress(const MatrixSource&, double, int);
  friend class HbsInverse;
  int n_ = 0;
  double tol_ = 0.0;
  bool dense_fallback_ = false;
  CMat dense_;  // only in fallback mode
  std::vector<HbsNode> nodes_;
  std::vector<std::vector<int>> levels_;  // node ids per level, root level first
};

HbsMatrix hbs_compress(const MatrixSource& src, double tol, int leaf_size = 64);

class HbsInverse {
 public:
  HbsInverse() = default;
  explicit HbsInverse(const HbsMatrix& h);
  CVec solve(const CVec& b) const;
  CMat solve(const CMat& b) const;
  int dim() const { return h_.dim(); }
  bool dense_fallback() const { return h_.dense_fallback(); }

 private:
  HbsMatrix h_;
  Eigen::PartialPivLU<CMat> root_lu_;
};

HbsInverse hbs_invert(const HbsMatrix& h);

}  // namespace strata
