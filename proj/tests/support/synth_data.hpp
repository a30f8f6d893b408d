#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace capsnet::testing {

// Procedurally generated stand-ins for the real datasets, written in the
// bit-exact on-disk formats (MNIST IDX, CIFAR-10 binary) so the loaders run
// unchanged. Ten visually distinct classes with per-image jitter and noise.

// Renders one 28x28 grayscale digit (values 0..255).
std::vector<std::uint8_t> render_digit(int digit, std::uint64_t seed);

// Renders one 32x32 RGB class pattern in CIFAR plane order (R,G,B planes).
std::vector<std::uint8_t> render_cifar_pattern(int cls, std::uint64_t seed);

// train-images/train-labels/t10k-images/t10k-labels under dir, with the given
// example counts. Labels cycle 0..9, so any truncation to a multiple of 10 is
// class-balanced.
void write_synthetic_mnist(const std::string& dir, int n_train, int n_val, std::uint64_t seed);

// data_batch_1..5.bin and test_batch.bin, 10000 records each (format-fixed).
void write_synthetic_cifar10(const std::string& dir, std::uint64_t seed);

}  // namespace capsnet::testing
