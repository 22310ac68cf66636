#include "pongrl/arch.hpp"

#include <charconv>
#include <cmath>

namespace pongrl::nn {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) next = s.size();
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

int parse_nonneg(std::string_view tok, std::string_view what) {
    int value = -1;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || value < 0)
        throw ConfigError("architecture: bad " + std::string(what) + " token '" +
                          std::string(tok) + "'");
    return value;
}

int parse_int(std::string_view tok, std::string_view what) {
    int value = parse_nonneg(tok, what);
    if (value == 0)
        throw ConfigError("architecture: " + std::string(what) + " must be positive in '" +
                          std::string(tok) + "'");
    return value;
}

// conv(COUNT,KHxKW[,sS][,pP])
ConvSpec parse_conv(std::string_view tok) {
    std::string_view inner = tok;
    inner.remove_prefix(5); // "conv("
    if (inner.empty() || inner.back() != ')')
        throw ConfigError("architecture: unterminated conv token '" + std::string(tok) + "'");
    inner.remove_suffix(1);

    ConvSpec c;
    auto parts = split(inner, ',');
    if (parts.size() < 2)
        throw ConfigError("architecture: conv needs count and kernel in '" + std::string(tok) + "'");
    c.count = parse_int(parts[0], "conv count");
    auto kparts = split(parts[1], 'x');
    if (kparts.size() != 2)
        throw ConfigError("architecture: conv kernel must be KHxKW in '" + std::string(tok) + "'");
    c.kh = parse_int(kparts[0], "kernel height");
    c.kw = parse_int(kparts[1], "kernel width");
    for (size_t i = 2; i < parts.size(); ++i) {
        auto p = parts[i];
        if (p.size() >= 2 && p[0] == 's')
            c.stride = parse_int(p.substr(1), "stride");
        else if (p.size() >= 2 && p[0] == 'p')
            c.pad = parse_nonneg(p.substr(1), "padding");
        else
            throw ConfigError("architecture: unknown conv option '" + std::string(p) + "'");
    }
    return c;
}

} // namespace

std::string to_string(Activation a) {
    switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
    case Activation::Linear: return "linear";
    }
    return "?";
}

size_t ArchitectureSpec::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) {
        if (l.is_conv)
            n += static_cast<size_t>(l.conv.kernel_size()) + l.conv.count;
        else
            n += static_cast<size_t>(l.in_width) * l.out_width + l.out_width;
    }
    if (has_value_head) {
        const int vh_in = layers.size() >= 2 ? layers[layers.size() - 2].out_width : input_size;
        n += static_cast<size_t>(vh_in) + 1;
    }
    return n;
}

std::string ArchitectureSpec::canonical() const {
    std::string s = descriptor + ";" + to_string(output_activation);
    if (has_value_head) s += ";v";
    return s;
}

ArchitectureSpec parse_architecture(std::string_view text, Activation default_output,
                                    bool default_value_head) {
    ArchitectureSpec spec;
    spec.output_activation = default_output;
    spec.has_value_head = default_value_head;

    auto sections = split(text, ';');
    spec.descriptor = std::string(sections[0]);
    for (size_t i = 1; i < sections.size(); ++i) {
        auto s = sections[i];
        if (s == "sigmoid") spec.output_activation = Activation::Sigmoid;
        else if (s == "softmax") spec.output_activation = Activation::Softmax;
        else if (s == "linear") spec.output_activation = Activation::Linear;
        else if (s == "v") spec.has_value_head = true;
        else
            throw ConfigError("architecture: unknown annotation '" + std::string(s) + "'");
    }

    auto tokens = split(sections[0], ':');
    if (tokens.size() < 2)
        throw ConfigError("architecture: need at least input and output sizes in '" +
                          std::string(text) + "'");
    spec.input_size = parse_int(tokens[0], "input size");

    int cur_width = spec.input_size;
    // Conv layers view the flattened input as a square single-channel image.
    int cur_c = 1;
    int cur_h = 0, cur_w = 0;
    bool have_image = false;

    for (size_t i = 1; i < tokens.size(); ++i) {
        auto tok = tokens[i];
        LayerSpec layer;
        if (tok.rfind("conv(", 0) == 0) {
            if (!have_image) {
                const int side = static_cast<int>(std::lround(std::sqrt(double(cur_width))));
                if (side * side != cur_width)
                    throw ConfigError("architecture: conv input " + std::to_string(cur_width) +
                                      " is not a square image");
                cur_h = cur_w = side;
                have_image = true;
            }
            layer.is_conv = true;
            layer.conv = parse_conv(tok);
            layer.conv.in_c = cur_c;
            layer.conv.in_h = cur_h;
            layer.conv.in_w = cur_w;
            layer.conv.out_h = (cur_h + 2 * layer.conv.pad - layer.conv.kh) / layer.conv.stride + 1;
            layer.conv.out_w = (cur_w + 2 * layer.conv.pad - layer.conv.kw) / layer.conv.stride + 1;
            if (layer.conv.out_h < 1 || layer.conv.out_w < 1)
                throw ConfigError("architecture: conv '" + std::string(tok) +
                                  "' produces an empty output map");
            layer.in_width = cur_width;
            layer.out_width = layer.conv.out_size();
            cur_c = layer.conv.count;
            cur_h = layer.conv.out_h;
            cur_w = layer.conv.out_w;
            cur_width = layer.out_width;
            layer.act = Activation::ReLU;
        } else {
            layer.in_width = cur_width;
            layer.out_width = parse_int(tok, "layer width");
            cur_width = layer.out_width;
            have_image = false;
            layer.act = Activation::ReLU;
        }
        spec.layers.push_back(layer);
    }
    if (spec.layers.back().is_conv)
        throw ConfigError("architecture: last layer must be dense");
    spec.layers.back().act = spec.output_activation;
    return spec;
}

} // namespace pongrl::nn
