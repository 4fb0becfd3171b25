// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint wire format (little-endian):
//   magic "CLGT", u32 version, u32 tensor count, then per tensor:
//   u16 name length, UTF-8 name, u8 dtype (0=f32, 1=f64), u8 rank,
//   u32 dims..., raw values.
// Model parameters are stored as f32 tensors; the training step and the
// config echo travel as f64 tensors under reserved "meta." / "cfg." names.

#ifndef CLGT_CHECKPOINT_HPP
#define CLGT_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "clgt/model.hpp"

namespace clgt {

struct CheckpointTensor {
    std::string name;
    DType dtype = DType::F32;
    std::vector<int> shape;
    std::vector<unsigned char> raw;

    static CheckpointTensor from_f32(const std::string& name, const Tensor<float>& t);
    static CheckpointTensor from_f64(const std::string& name, const Tensor<double>& t);
    Tensor<float> to_f32() const;
    Tensor<double> to_f64() const;
};

void write_checkpoint(const std::string& path, const std::vector<CheckpointTensor>& tensors,
                      uint32_t version = 1);
std::vector<CheckpointTensor> read_checkpoint(const std::string& path,
                                              uint32_t* version = nullptr);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace clgt

#endif
