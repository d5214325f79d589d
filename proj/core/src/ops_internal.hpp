// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <Eigen/Dense>
#include <string>

#include "nakul/autograd.hpp"
#include "nakul/errors.hpp"

namespace nakul::ops::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline Tape& tape_of(const Var& v) {
  if (!v.valid()) throw std::logic_error("operation on an empty Var");
  return *v.tape();
}

inline void expect_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(v.shape()));
  }
}

inline void expect_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace nakul::ops::detail
