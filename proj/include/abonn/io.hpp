#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "abonn/error.hpp"
#include "abonn/network.hpp"
#include "abonn/specification.hpp"
#include "abonn/tree.hpp"

namespace abonn {

using json = nlohmann::json;

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// NNet text format

struct NnetOptions {
    /// Fold the input/output normalization constants into the first and last layers.
    bool apply_normalization = false;
};

namespace detail {

struct NumericLine {
    std::size_t line_no;
    std::vector<double> values;
};

inline std::vector<double> parse_csv_numbers(std::string_view text, std::size_t line_no) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string tok(text.substr(pos, comma - pos));
        const auto first = tok.find_first_not_of(" \t\r");
        if (first != std::string::npos) {
            const auto last = tok.find_last_not_of(" \t\r");
            tok = tok.substr(first, last - first + 1);
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size() || !std::isfinite(v))
                throw ParseError("non-numeric token '" + tok + "'", line_no);
            out.push_back(v);
        }
        pos = comma + 1;
    }
    return out;
}

inline bool matches_widths(const std::vector<NumericLine>& lines, std::size_t at, std::initializer_list<std::size_t> w) {
    if (lines.size() < at + w.size()) return false;
    std::size_t i = at;
    for (std::size_t width : w)
        if (lines[i++].values.size() != width) return false;
    return true;
}

}  // namespace detail

/// Parses ACAS-style NNet text: "//" comment lines, a counts line
/// (layers, inputs, outputs, max size), a layer-sizes line, an optional
/// normalization block, then per layer one weight row per line followed by
/// one bias value per line.
inline Network load_nnet(std::istream& in, const NnetOptions& opts = {}) {
    std::vector<detail::NumericLine> lines;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        const auto first = text.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (text.compare(first, 2, "//") == 0) continue;
        lines.push_back({line_no, detail::parse_csv_numbers(text, line_no)});
    }
    if (lines.size() < 2) throw ParseError("missing header lines", line_no);

    auto as_size = [](double v, std::size_t ln, const char* what) {
        if (v < 1.0 || v != std::floor(v)) throw ParseError(std::string("invalid ") + what, ln);
        return static_cast<std::size_t>(v);
    };
    const auto& counts = lines[0];
    if (counts.values.size() < 3) throw ParseError("counts line needs layer, input and output counts", counts.line_no);
    const std::size_t layer_count = as_size(counts.values[0], counts.line_no, "layer count");
    const std::size_t input_size = as_size(counts.values[1], counts.line_no, "input size");
    const std::size_t output_size = as_size(counts.values[2], counts.line_no, "output size");

    const auto& sizes_line = lines[1];
    if (sizes_line.values.size() != layer_count + 1)
        throw ParseError("layer-sizes line must list " + std::to_string(layer_count + 1) + " sizes", sizes_line.line_no);
    std::vector<std::size_t> sizes;
    for (double v : sizes_line.values) sizes.push_back(as_size(v, sizes_line.line_no, "layer size"));
    if (sizes.front() != input_size || sizes.back() != output_size)
        throw ParseError("layer sizes disagree with declared input/output sizes", sizes_line.line_no);

    std::size_t at = 2;
    std::optional<Normalization> norm;
    auto take_norm = [&](std::size_t start) {
        Normalization n{lines[start].values, lines[start + 1].values, lines[start + 2].values, lines[start + 3].values};
        norm = std::move(n);
        at = start + 4;
    };
    const std::size_t nin = input_size;
    if (detail::matches_widths(lines, at, {1, nin, nin, nin + 1, nin + 1})) take_norm(at + 1);
    else if (detail::matches_widths(lines, at, {nin, nin, nin + 1, nin + 1})) take_norm(at);

    std::vector<Layer> layers;
    for (std::size_t li = 0; li < layer_count; ++li) {
        const std::size_t rows = sizes[li + 1], cols = sizes[li];
        Layer layer{Matrix(rows, cols), Vector(rows), li + 1 < layer_count ? Activation::relu : Activation::identity};
        for (std::size_t r = 0; r < rows; ++r, ++at) {
            if (at >= lines.size())
                throw ParseError("layer " + std::to_string(li) + ": expected " + std::to_string(rows) + " weight rows",
                                 line_no);
            const auto& l = lines[at];
            if (l.values.size() != cols)
                throw ParseError("layer " + std::to_string(li) + ": weight row has " + std::to_string(l.values.size()) +
                                     " values, expected " + std::to_string(cols),
                                 l.line_no);
            for (std::size_t c = 0; c < cols; ++c) layer.weights(r, c) = l.values[c];
        }
        for (std::size_t r = 0; r < rows; ++r, ++at) {
            if (at >= lines.size())
                throw ParseError("layer " + std::to_string(li) + ": expected " + std::to_string(rows) + " bias rows",
                                 line_no);
            const auto& l = lines[at];
            if (l.values.size() != 1)
                throw ParseError("layer " + std::to_string(li) + ": bias row has " + std::to_string(l.values.size()) +
                                     " values, expected 1",
                                 l.line_no);
            layer.bias[r] = l.values[0];
        }
        layers.push_back(std::move(layer));
    }
    if (at != lines.size()) throw ParseError("unexpected trailing data", lines[at].line_no);

    if (opts.apply_normalization && norm) {
        Layer& first = layers.front();
        for (std::size_t r = 0; r < first.out_dim(); ++r)
            for (std::size_t c = 0; c < first.in_dim(); ++c) {
                const double scaled = first.weights(r, c) / norm->ranges[c];
                first.bias[r] -= scaled * norm->means[c];
                first.weights(r, c) = scaled;
            }
        Layer& last = layers.back();
        const double out_mean = norm->means[nin], out_range = norm->ranges[nin];
        for (std::size_t r = 0; r < last.out_dim(); ++r) {
            for (std::size_t c = 0; c < last.in_dim(); ++c) last.weights(r, c) *= out_range;
            last.bias[r] = last.bias[r] * out_range + out_mean;
        }
    }
    try {
        return Network(std::move(layers), std::move(norm));
    } catch (const DimensionError& e) {
        throw ParseError(e.what());
    }
}

inline Network load_nnet(std::string_view text, const NnetOptions& opts = {}) {
    std::istringstream in{std::string(text)};
    return load_nnet(in, opts);
}

// ---------------------------------------------------------------------------
// JSON network format

inline json network_to_json(const Network& net) {
    json layers = json::array();
    for (const Layer& l : net.layers()) {
        json rows = json::array();
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            auto row = l.weights.row(r);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        layers.push_back({{"weights", rows}, {"bias", l.bias}, {"activation", to_string(l.activation)}});
    }
    return {{"layers", layers}};
}

inline std::string serialize(const Network& net) { return network_to_json(net).dump(); }

namespace detail {

inline const json& field(const json& obj, const char* name, const std::string& where) {
    if (!obj.is_object() || !obj.contains(name)) throw ParseError(where + ": missing field '" + name + "'");
    return obj.at(name);
}

inline Vector number_array(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
    Vector v;
    for (const auto& e : j) {
        if (!e.is_number()) throw ParseError(where + ": expected a number");
        v.push_back(e.get<double>());
    }
    return v;
}

inline json parse_json_text(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace detail

inline Network network_from_json(const json& j) {
    const json& layers_j = detail::field(j, "layers", "network");
    if (!layers_j.is_array() || layers_j.empty()) throw ParseError("network: 'layers' must be a non-empty array");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i < layers_j.size(); ++i) {
        const std::string where = "layer " + std::to_string(i);
        const json& lj = layers_j[i];
        const json& wj = detail::field(lj, "weights", where);
        if (!wj.is_array() || wj.empty()) throw ParseError(where + ": 'weights' must be a non-empty array of rows");
        std::vector<Vector> rows;
        for (const auto& r : wj) rows.push_back(detail::number_array(r, where + " weights"));
        Layer layer;
        try {
            layer.weights = Matrix::from_rows(rows);
        } catch (const DimensionError&) {
            throw ParseError(where + ": ragged weight matrix");
        }
        layer.bias = detail::number_array(detail::field(lj, "bias", where), where + " bias");
        const json& aj = detail::field(lj, "activation", where);
        const std::string act = aj.is_string() ? aj.get<std::string>() : "";
        if (act == "relu") layer.activation = Activation::relu;
        else if (act == "identity") layer.activation = Activation::identity;
        else throw ParseError(where + ": invalid activation '" + (aj.is_string() ? act : aj.dump()) + "'");
        layers.push_back(std::move(layer));
    }
    try {
        return Network(std::move(layers));
    } catch (const DimensionError& e) {
        throw ParseError(e.what());
    }
}

inline Network load_json(std::string_view text) { return network_from_json(detail::parse_json_text(text)); }

/// Loads by extension: ".nnet" as NNet text, anything else as JSON.
inline Network load_network_file(const std::string& path, const NnetOptions& opts = {}) {
    const std::string text = read_text_file(path);
    try {
        if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".nnet") == 0) return load_nnet(text, opts);
        return load_json(text);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Specification JSON

/// Robustness form {"center","epsilon","label","domain":[lo,hi]} (needs the
/// network's output_dim) or explicit {"box":{lower,upper},"constraints":[...]}.
inline Specification spec_from_json(const json& j, std::size_t output_dim) {
    if (!j.is_object()) throw ParseError("specification must be a JSON object");
    try {
        if (j.contains("box")) {
            const json& box = j.at("box");
            InputRegion region(detail::number_array(detail::field(box, "lower", "box"), "box lower"),
                               detail::number_array(detail::field(box, "upper", "box"), "box upper"));
            const json& cj = detail::field(j, "constraints", "specification");
            if (!cj.is_array()) throw ParseError("'constraints' must be an array");
            std::vector<LinearConstraint> cs;
            for (const auto& c : cj) {
                LinearConstraint lc{detail::number_array(detail::field(c, "coeffs", "constraint"), "coeffs"), 0.0};
                const json& off = detail::field(c, "offset", "constraint");
                if (!off.is_number()) throw ParseError("constraint offset must be a number");
                lc.offset = off.get<double>();
                cs.push_back(std::move(lc));
            }
            return {std::move(region), OutputProperty(std::move(cs))};
        }
        const Vector center = detail::number_array(detail::field(j, "center", "specification"), "center");
        const json& eps = detail::field(j, "epsilon", "specification");
        const json& label = detail::field(j, "label", "specification");
        if (!eps.is_number() || !label.is_number_integer() || label.get<long long>() < 0)
            throw ParseError("epsilon must be a number and label a non-negative integer");
        double lo = 0.0, hi = 1.0;
        if (j.contains("domain")) {
            const Vector d = detail::number_array(j.at("domain"), "domain");
            if (d.size() != 2) throw ParseError("domain must be [lower, upper]");
            lo = d[0];
            hi = d[1];
        }
        return robustness_spec(center, eps.get<double>(), label.get<std::size_t>(), lo, hi, output_dim);
    } catch (const PreconditionError& e) {
        throw ParseError(std::string("specification: ") + e.what());
    } catch (const DimensionError& e) {
        throw ParseError(std::string("specification: ") + e.what());
    }
}

inline Specification load_spec(std::string_view text, std::size_t output_dim) {
    return spec_from_json(detail::parse_json_text(text), output_dim);
}

inline json spec_to_json(const Specification& s) {
    json cs = json::array();
    for (const auto& c : s.property.constraints) cs.push_back({{"coeffs", c.coeffs}, {"offset", c.offset}});
    return {{"box", {{"lower", s.region.lower}, {"upper", s.region.upper}}}, {"constraints", cs}};
}

// ---------------------------------------------------------------------------
// Tree dumps

/// Extended reals as JSON: finite numbers, or the strings "+inf" / "-inf".
inline json extended_to_json(double v) {
    if (v == pos_inf) return "+inf";
    if (v == neg_inf) return "-inf";
    return v;
}

inline json tree_to_json(const BabTree& tree) {
    json nodes = json::array();
    for (const BabNode& n : tree.nodes()) {
        json e = nullptr;
        if (n.edge)
            e = {{"layer", n.edge->neuron.layer},
                 {"unit", n.edge->neuron.unit},
                 {"sign", n.edge->sign == PhaseSign::positive ? "+" : "-"}};
        nodes.push_back({{"id", n.id},
                         {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                         {"edge", e},
                         {"depth", n.depth},
                         {"p_hat", extended_to_json(n.p_hat)},
                         {"reward", extended_to_json(n.reward)},
                         {"size", n.subtree_size},
                         {"status", to_string(n.status)}});
    }
    return nodes;
}

inline std::string tree_to_dot(const BabTree& tree) {
    auto fmt = [](double v) {
        if (v == pos_inf) return std::string("+inf");
        if (v == neg_inf) return std::string("-inf");
        std::ostringstream s;
        s.precision(3);
        s << v;
        return s.str();
    };
    std::ostringstream out;
    out << "digraph bab {\n  node [shape=box, fontname=\"monospace\"];\n";
    for (const BabNode& n : tree.nodes()) {
        out << "  n" << n.id << " [label=\"#" << n.id << "\\np=" << fmt(n.p_hat) << "\\nR=" << fmt(n.reward) << "\\n"
            << to_string(n.status) << "\"";
        if (n.status == NodeStatus::violated && !n.children) out << ", color=red";
        if (n.status == NodeStatus::verified && !n.children) out << ", color=darkgreen";
        out << "];\n";
    }
    for (const BabNode& n : tree.nodes()) {
        if (!n.parent) continue;
        out << "  n" << *n.parent << " -> n" << n.id << " [label=\"r" << (n.edge->sign == PhaseSign::positive ? "+" : "-")
            << "(" << n.edge->neuron.layer << "," << n.edge->neuron.unit << ")\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace abonn
