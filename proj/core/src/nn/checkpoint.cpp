#include "checkpoint.hpp"

#include "../text_io.hpp"
#include "ssr/error.hpp"

namespace ssr::nn::detail {

nlohmann::json config_to_json(const TransformerConfig& cfg) {
  return {{"d_model", cfg.d_model},           {"n_heads", cfg.n_heads},
          {"d_ff", cfg.d_ff},                 {"n_enc_layers", cfg.n_enc_layers},
          {"n_dec_layers", cfg.n_dec_layers}, {"dropout", cfg.dropout},
          {"relpos_clip", cfg.relpos_clip},   {"session_dim", cfg.session_dim},
          {"seed", cfg.seed}};
}

TransformerConfig config_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.n_enc_layers = j.at("n_enc_layers").get<std::size_t>();
  c.n_dec_layers = j.at("n_dec_layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.relpos_clip = j.at("relpos_clip").get<std::size_t>();
  c.session_dim = j.at("session_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json store_to_json(const ParamStore& store) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Matrix& m = store.value(i);
    std::vector<double> data(m.data(), m.data() + m.size());
    arr.push_back({{"name", store.name(i)},
                   {"shape", {m.rows(), m.cols()}},
                   {"trainable", store.trainable(i)},
                   {"data", std::move(data)}});
  }
  return arr;
}

ParamStore store_from_json(const nlohmann::json& j) {
  ParamStore store;
  for (const auto& t : j) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(data.size()) == rows * cols, ErrorKind::Io,
            "tensor '" + name + "' has " + std::to_string(data.size()) + " values for shape " +
                std::to_string(rows) + "x" + std::to_string(cols));
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    store.add(name, std::move(m), t.value("trainable", true));
  }
  return store;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  ssr::detail::write_file(path, j.dump(1) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(ssr::detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, path.string() + ": " + e.what());
  }
}

}  // namespace ssr::nn::detail
