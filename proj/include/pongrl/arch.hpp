#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pongrl/errors.hpp"

namespace pongrl::nn {

enum class Activation { ReLU, Sigmoid, Softmax, Linear };

std::string to_string(Activation a);

// Resolved shape of one conv layer. Input/output shapes are filled in
// during parsing from the flattened input size (assumed square, 1 channel
// for the first layer).
struct ConvSpec {
    int count = 0, kh = 0, kw = 0;
    int stride = 1, pad = 0;
    int in_c = 0, in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
    int out_size() const { return count * out_h * out_w; }
    int kernel_size() const { return count * kh * kw * in_c; }
};

struct LayerSpec {
    bool is_conv = false;
    int in_width = 0;  // flattened input size
    int out_width = 0; // flattened output size
    ConvSpec conv;     // valid when is_conv
    Activation act = Activation::ReLU;
};

// Parsed network architecture, e.g. "6400:200:3" or
// "6400:conv(16,8x8,s4):conv(32,4x4,s2,p1):256:3". Hidden layers are ReLU;
// the output layer activation and the optional value head are annotations
// appended after ';' in the canonical form ("6400:256:3;softmax;v") so a
// checkpoint descriptor round-trips the full head configuration.
struct ArchitectureSpec {
    std::string descriptor; // layer part only, as written
    int input_size = 0;
    std::vector<LayerSpec> layers; // hidden layers then output layer
    Activation output_activation = Activation::Sigmoid;
    bool has_value_head = false;

    int output_size() const { return layers.back().out_width; }
    size_t param_count() const;
    std::string canonical() const;
};

// Parses a descriptor. ";sigmoid" / ";softmax" / ";linear" and ";v"
// annotations in the text win over the defaults passed here.
// Throws ConfigError naming the offending token.
ArchitectureSpec parse_architecture(std::string_view text,
                                    Activation default_output = Activation::Sigmoid,
                                    bool default_value_head = false);

} // namespace pongrl::nn
