#include "glamor/tensor_io.hpp"

#include <fstream>
#include <ostream>

#include "glamor/errors.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

namespace {
constexpr std::string_view kMagic = "#tensor4";
constexpr std::string_view kVersion = "v1";
constexpr std::string_view kShapeKey = "shape=";
}  // namespace

void write_tensor(std::ostream& out, const Tensor4& tensor) {
  const Shape4& s = tensor.shape();
  out << kMagic << ' ' << kVersion << ' ' << kShapeKey << s.n << ',' << s.c << ',' << s.h << ','
      << s.w << '\n';
  const std::size_t row = s.w;
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    out << format_real(tensor[i]);
    out << (((i + 1) % row == 0) ? '\n' : ' ');
  }
}

Tensor4 read_tensor(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw DataError("empty tensor file", 1);

  const auto header = split_whitespace(line);
  if (header.size() != 3 || header[0] != kMagic || header[1] != kVersion ||
      header[2].substr(0, kShapeKey.size()) != kShapeKey) {
    throw DataError("expected header '#tensor4 v1 shape=N,C,H,W'", reader.line_number());
  }
  const auto dims = split(header[2].substr(kShapeKey.size()), ',');
  if (dims.size() != 4) throw DataError("shape needs four dimensions", reader.line_number());
  Shape4 shape{parse_size(dims[0], 1), parse_size(dims[1], 1), parse_size(dims[2], 1),
               parse_size(dims[3], 1)};

  std::vector<double> values;
  values.reserve(shape.numel());
  while (reader.next(line)) {
    for (auto token : split_whitespace(line)) {
      if (values.size() == shape.numel()) {
        throw DataError("more values than shape " + shape.str() + " allows", reader.line_number());
      }
      values.push_back(parse_real(token, reader.line_number()));
    }
  }
  if (values.size() != shape.numel()) {
    throw DataError("expected " + std::to_string(shape.numel()) + " values, found " +
                        std::to_string(values.size()),
                    reader.line_number());
  }
  return Tensor4(shape, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor4& tensor) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_tensor(out, tensor);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Tensor4 load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return read_tensor(in);
  } catch (const DataError& e) {
    throw DataError::prefixed(e, path.string());
  }
}

}  // namespace glamor
