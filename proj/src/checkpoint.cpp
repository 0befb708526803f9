// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/checkpoint.hpp"

#include "mpvqa/error.hpp"
#include "mpvqa/file_util.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>

namespace mpvqa {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'E', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, std::uint64_t seed) {
  const MoEConfig& c = model.moe.config;
  nlohmann::ordered_json m;
  m["format"] = "MOECKPT1";
  m["seed"] = seed;
  m["config"] = {{"n_experts", c.n_experts}, {"n_modalities", c.n_modalities},
                 {"n_tokens", c.n_tokens},   {"d_image", c.d_image},
                 {"d_text", c.d_text},       {"hidden", c.hidden_width()}};
  auto tags = nlohmann::ordered_json::array();
  for (int n = 0; n < c.n_experts; ++n) tags.push_back(std::string(to_string(c.granularity_of(n))));
  m["granularity"] = tags;
  auto table = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for_each_tensor(model, [&](const std::string& name, const double*, std::size_t n) {
    table.push_back({{"name", name}, {"size", n}, {"offset", offset}});
    offset += n;
  });
  m["tensors"] = table;
  m["total"] = offset;
  const std::string manifest = m.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u64(out, manifest.size());
  out.insert(out.end(), manifest.begin(), manifest.end());
  for_each_tensor(model, [&](const std::string&, const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(p[i]));
  });
  return out;
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::uint64_t* seed) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a MOECKPT1 checkpoint");
  }
  const std::uint64_t len = get_u64(bytes.data() + 8);
  if (len > bytes.size() - 16) throw FormatError("checkpoint manifest is truncated");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  MoEConfig c;
  try {
    const auto& jc = m.at("config");
    c.n_experts = jc.at("n_experts").get<int>();
    c.n_modalities = jc.at("n_modalities").get<int>();
    c.n_tokens = jc.at("n_tokens").get<int>();
    c.d_image = jc.at("d_image").get<int>();
    c.d_text = jc.at("d_text").get<int>();
    c.hidden = jc.at("hidden").get<int>();
    for (const auto& t : m.at("granularity")) c.granularity.push_back(parse_granularity(t.get<std::string>()));
    if (seed) *seed = m.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  Model model;
  try {
    model = Model::zeros(c);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  const auto& table = m.at("tensors");
  std::size_t t = 0;
  std::size_t pos = 16 + static_cast<std::size_t>(len);
  for_each_tensor(model, [&](const std::string& name, double* p, std::size_t n) {
    if (t >= table.size() || table[t].at("name") != name || table[t].at("size").get<std::size_t>() != n) {
      throw FormatError("checkpoint tensor table does not match config at " + name);
    }
    if (bytes.size() < pos + 8 * n) throw FormatError("checkpoint payload is truncated");
    for (std::size_t i = 0; i < n; ++i) p[i] = std::bit_cast<double>(get_u64(bytes.data() + pos + 8 * i));
    pos += 8 * n;
    ++t;
  });
  if (t != table.size() || pos != bytes.size()) throw FormatError("checkpoint has trailing tensors or bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed) {
  const auto bytes = encode_checkpoint(model, seed);
  write_file_atomic(path, std::span<const std::uint8_t>(bytes));
}

Model load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed) {
  return decode_checkpoint(read_file_bytes(path), seed);
}

}  // namespace mpvqa
