#pragma once

#include "edge/fibertree.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edge::io {

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text; the message carries the source name and line number when known.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MatrixMarketOptions {
    bool symmetrize = false;
    DType dtype = DType::Int;
    std::optional<Scalar> empty;  // zero of dtype when unset
    std::string name = "G";
};

struct LoadedMatrix {
    Tensor tensor;  // square: vertices x vertices
    int64_t rows = 0;
    int64_t cols = 0;
    int64_t vertices = 0;
};

LoadedMatrix load_matrix_market(const std::string& path, const MatrixMarketOptions& opt = {});
LoadedMatrix read_matrix_market(std::istream& in, const MatrixMarketOptions& opt = {},
                                const std::string& source = "<input>");

struct IdList {
    std::vector<int64_t> ids;
    std::vector<std::string> warnings;
};

IdList parse_id_list(std::string_view text);
// `@path` reads the list from a file; anything else is parsed inline.
IdList load_id_list(const std::string& arg);

std::string dump_header(const Tensor& t);
void dump_tensor(const Tensor& t, std::ostream& out);
std::string dump_string(const Tensor& t);

// Reads every tensor in a dump stream.
std::vector<Tensor> parse_dumps(std::istream& in);
Tensor parse_dump(std::string_view text);

}  // namespace edge::io
