// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "drfuse/graph.hpp"

namespace drfuse::ops {

// Vectors travel through the graph as 1 x d matrices; scalars as shape {1}.

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var hadamard(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var add_rowvec(Tape& t, Var m, Var v);  // broadcast a 1 x c row over r x c

Var matmul(Tape& t, Var a, Var b);
Var matmul_nt(Tape& t, Var a, Var b);  // a * b^T

Var relu(Tape& t, Var a);
Var tanh_op(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);  // clamped to the probability floor

Var mean_rows(Tape& t, Var m);  // r x c -> 1 x c
Var slice_cols(Tape& t, Var m, std::size_t c0, std::size_t c1);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var stack_rows(Tape& t, const std::vector<Var>& rows);  // n rows of 1 x d -> n x d

Var softmax_rows(Tape& t, Var m);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);

Var conv2d(Tape& t, Var x, Var w, Var b, std::size_t stride, std::size_t pad);
Var global_avg_pool(Tape& t, Var x);  // C x H x W -> 1 x C

Var logit_pool(Tape& t, Var a, Var b);
Var jsd_loss(Tape& t, Var a, Var b);   // scalar, mean over dims
Var mse_loss(Tape& t, Var a, Var b);   // scalar, mean over dims
Var orth_loss(Tape& t, Var a, Var b);  // scalar

// softmax((scores + mask)/sqrt(d)); masked entries are exactly zero.
Var masked_attention(Tape& t, Var scores, const std::vector<double>& mask, std::size_t d);
// sum_i alpha_i * m_i over unmasked rows only, so the result never reads a
// masked row of m.
Var attend_rows(Tape& t, Var alpha, Var m, const std::vector<double>& mask);

// Per-row inner products of two r x c matrices -> 1 x r.
Var rows_dot(Tape& t, Var a, Var b);

Var bce_sum(Tape& t, Var y_hat, const std::vector<double>& y);  // scalar
Var margin_rank(Tape& t, Var alpha, const Tensor& aux_losses, double epsilon);  // scalar

Var add_scalars(Tape& t, const std::vector<Var>& vs);
Var scalar_weighted_sum(Tape& t, const std::vector<Var>& vs, const std::vector<double>& w);

}  // namespace drfuse::ops
