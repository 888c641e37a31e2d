// Checkpoint format:
//
//   hta-mlp 1
//   input <n>
//   layers <L>
//   layer <in> <out> <activation>      (L lines)
//   <weights of layer 0, one row per line, space separated>
//   <bias of layer 0, one line>
//   ... repeated per layer
//
// Values use the shortest round-trip decimal form, so a save/load cycle is exact.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hta/network.hpp"
#include "hta/text_io.hpp"

namespace hta {

namespace {

void write_row(std::ostream& os, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ' ';
        os << format_double(values[i]);
    }
    os << '\n';
}

class LineReader {
public:
    explicit LineReader(std::istream& is) : is_(is) {}

    std::string next() {
        std::string line;
        while (std::getline(is_, line)) {
            ++line_no_;
            if (!trim(line).empty()) return line;
        }
        fail("unexpected end of file");
    }

    std::vector<double> numbers(std::size_t expected) {
        const std::string line = next();
        std::vector<double> out;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            try {
                out.push_back(parse_double(tok));
            } catch (const std::invalid_argument& e) {
                fail(e.what());
            }
        }
        if (out.size() != expected) {
            fail("expected " + std::to_string(expected) + " values, found " + std::to_string(out.size()));
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("load_mlp: line " + std::to_string(line_no_) + ": " + what);
    }

private:
    std::istream& is_;
    std::size_t line_no_ = 0;
};

}  // namespace

void save_mlp(std::ostream& os, const Mlp& net) {
    const auto& arch = net.arch();
    os << "hta-mlp 1\n";
    os << "input " << arch.input_dim() << '\n';
    os << "layers " << arch.num_layers() << '\n';
    for (const auto& s : arch.layers()) os << "layer " << s.in << ' ' << s.out << ' ' << to_string(s.activation) << '\n';
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
        const auto& s = arch.layer(l);
        for (std::size_t r = 0; r < s.out; ++r)
            write_row(os, net.params().subspan(arch.weight_offset(l) + r * s.in, s.in));
        write_row(os, net.params().subspan(arch.bias_offset(l), s.out));
    }
}

Mlp load_mlp(std::istream& is) {
    LineReader reader(is);
    auto expect_key = [&](const std::string& line, const std::string& key) {
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) reader.fail("expected '" + key + "'");
        std::string rest;
        std::getline(ls, rest);
        return rest;
    };
    if (trim(reader.next()) != "hta-mlp 1") reader.fail("missing 'hta-mlp 1' header");
    std::size_t input = 0, count = 0;
    try {
        input = parse_size(expect_key(reader.next(), "input"));
        count = parse_size(expect_key(reader.next(), "layers"));
    } catch (const std::invalid_argument& e) {
        reader.fail(e.what());
    }
    std::vector<LayerShape> shapes;
    for (std::size_t l = 0; l < count; ++l) {
        std::istringstream ls(expect_key(reader.next(), "layer"));
        std::string in, out, act;
        ls >> in >> out >> act;
        try {
            shapes.push_back({parse_size(in), parse_size(out), activation_from_string(act)});
        } catch (const std::invalid_argument& e) {
            reader.fail(e.what());
        }
    }
    Architecture arch = [&] {
        try {
            return Architecture(input, shapes);
        } catch (const std::invalid_argument& e) {
            reader.fail(e.what());
        }
    }();
    ParamVector theta;
    theta.reserve(arch.num_params());
    for (const auto& s : arch.layers()) {
        for (std::size_t r = 0; r < s.out; ++r) {
            const auto row = reader.numbers(s.in);
            theta.insert(theta.end(), row.begin(), row.end());
        }
        const auto bias = reader.numbers(s.out);
        theta.insert(theta.end(), bias.begin(), bias.end());
    }
    return Mlp(std::move(arch), std::move(theta));
}

void save_mlp(const std::string& path, const Mlp& net) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_mlp: cannot open " + path);
    save_mlp(os, net);
}

Mlp load_mlp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_mlp: cannot open " + path);
    return load_mlp(is);
}

}  // namespace hta
