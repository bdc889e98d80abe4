#include "ssr/feature_matrix.hpp"

#include "ssr/error.hpp"
#include "text_io.hpp"

namespace ssr {

void FeatureMatrix::validate() const {
  require(static_cast<Eigen::Index>(dim_labels.size()) == data.cols(), ErrorKind::Parameter,
          "feature matrix has " + std::to_string(data.cols()) + " dims but " +
              std::to_string(dim_labels.size()) + " labels");
  require(frame_stride_s > 0.0 && frame_length_s > 0.0, ErrorKind::Parameter,
          "feature matrix frame timing must be positive");
  require(data.allFinite(), ErrorKind::Parameter, "feature matrix contains NaN or Inf");
}

// Layout:
//   ssr-features 1
//   frames <n> / dims <d> / frame_length_s <s> / frame_stride_s <s>
//   labels <d labels>
//   data
//   <one frame per line>
void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path) {
  fm.validate();
  std::string out = "ssr-features 1\n";
  out += "frames " + std::to_string(fm.frames()) + "\n";
  out += "dims " + std::to_string(fm.dims()) + "\n";
  out += "frame_length_s " + detail::format_double(fm.frame_length_s) + "\n";
  out += "frame_stride_s " + detail::format_double(fm.frame_stride_s) + "\n";
  out += "labels";
  for (const auto& l : fm.dim_labels) {
    require(!l.empty() && l.find_first_of(" \t\n") == std::string::npos, ErrorKind::Parameter,
            "feature label '" + l + "' must be non-empty without whitespace");
    out += ' ';
    out += l;
  }
  out += "\ndata\n";
  for (Eigen::Index r = 0; r < fm.frames(); ++r) {
    for (Eigen::Index c = 0; c < fm.dims(); ++c) {
      if (c) out += ' ';
      detail::append_double(out, fm.data(r, c));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::split_lines(text);
  const std::string ctx = path.string();
  require(!lines.empty() && detail::trim(lines[0]) == "ssr-features 1", ErrorKind::Io,
          ctx + ": not an ssr-features container");

  FeatureMatrix fm;
  long long frames = -1, dims = -1;
  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    auto tokens = detail::split_ws(lines[i]);
    if (tokens.empty()) continue;
    if (tokens[0] == "data") break;
    if (tokens[0] == "labels") {
      for (std::size_t t = 1; t < tokens.size(); ++t) fm.dim_labels.emplace_back(tokens[t]);
      continue;
    }
    require(tokens.size() == 2, ErrorKind::Io, ctx + ": malformed header line");
    if (tokens[0] == "frames") frames = detail::parse_int(tokens[1], ctx);
    else if (tokens[0] == "dims") dims = detail::parse_int(tokens[1], ctx);
    else if (tokens[0] == "frame_length_s") fm.frame_length_s = detail::parse_double(tokens[1], ctx);
    else if (tokens[0] == "frame_stride_s") fm.frame_stride_s = detail::parse_double(tokens[1], ctx);
    else fail(ErrorKind::Io, ctx + ": unknown header field '" + std::string(tokens[0]) + "'");
  }
  require(i < lines.size() && frames >= 0 && dims >= 0, ErrorKind::Io,
          ctx + ": missing frames/dims/data header");
  fm.data.resize(frames, dims);
  for (long long r = 0; r < frames; ++r) {
    require(i + 1 + static_cast<std::size_t>(r) < lines.size(), ErrorKind::Io,
            ctx + ": truncated data section");
    auto tokens = detail::split_ws(lines[i + 1 + r]);
    require(static_cast<long long>(tokens.size()) == dims, ErrorKind::Io,
            ctx + ": frame " + std::to_string(r) + " has wrong width");
    for (long long c = 0; c < dims; ++c) fm.data(r, c) = detail::parse_double(tokens[c], ctx);
  }
  fm.validate();
  return fm;
}

}  // namespace ssr
