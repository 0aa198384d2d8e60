#include <cstring>

#include "wbi/error.hpp"
#include "wbi/io.hpp"

namespace wbi {

namespace {

constexpr char kMagic[8] = {'W', 'B', 'I', 'C', 'K', 'P', 'T', '1'};

}  // namespace

std::string checkpoint_bytes(const NetworkBank& bank, const nlohmann::json& meta) {
  const BankDims& d = bank.dims();
  nlohmann::json manifest;
  manifest["format"] = "wbi-checkpoint";
  manifest["version"] = 1;
  manifest["dims"] = {{"m", d.m}, {"n", d.n}, {"s", d.s}, {"hidden", d.hidden},
                      {"decoder_hidden", d.decoder_hidden}};
  manifest["scaling"] = to_string(bank.scaling());
  manifest["procedures"] = bank.procedures();
  manifest["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  nlohmann::json arrays = nlohmann::json::array();
  std::size_t offset = 0;
  for (const ad::Parameter* p : bank.parameters()) {
    arrays.push_back({{"name", p->name},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()},
                      {"offset", offset}});
    offset += p->size();
  }
  manifest["arrays"] = arrays;
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const ad::Parameter* p : bank.parameters())
    out.append(reinterpret_cast<const char*>(p->value.data()), p->size() * sizeof(double));
  return out;
}

void save_checkpoint(const std::string& path, const NetworkBank& bank, const nlohmann::json& meta) {
  write_file(path, checkpoint_bytes(bank, meta));
}

NetworkBank checkpoint_from_bytes(const std::string& bytes, nlohmann::json* meta) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a checkpoint");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
  const std::size_t data_start = sizeof kMagic + 8 + len;
  if (len > bytes.size() || data_start > bytes.size()) throw FormatError("truncated checkpoint");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(sizeof kMagic + 8, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  // Schema errors in the manifest are format errors too.
  try {
    BankDims d;
    const auto& jd = manifest.at("dims");
    d.m = jd.at("m");
    d.n = jd.at("n");
    d.s = jd.at("s");
    d.hidden = jd.at("hidden");
    d.decoder_hidden = jd.at("decoder_hidden");
    NetworkBank bank = NetworkBank::zeros(d, manifest.at("procedures").get<std::vector<std::string>>(),
                                          scaling_from_string(manifest.at("scaling")));
    const auto& arrays = manifest.at("arrays");
    auto params = bank.parameters();
    if (arrays.size() != params.size()) throw FormatError("checkpoint array count mismatch");
    const std::size_t doubles = (bytes.size() - data_start) / sizeof(double);
    for (std::size_t k = 0; k < params.size(); ++k) {
      ad::Parameter& p = *params[k];
      const auto& a = arrays[k];
      if (a.at("name") != p.name || a.at("rows") != p.value.rows() || a.at("cols") != p.value.cols())
        throw FormatError("checkpoint array '" + a.at("name").get<std::string>() + "' does not match");
      const std::size_t off = a.at("offset");
      if (off + p.size() > doubles) throw FormatError("truncated checkpoint");
      std::memcpy(p.value.data(), bytes.data() + data_start + off * sizeof(double),
                  p.size() * sizeof(double));
    }
    if (meta) *meta = manifest.at("meta");
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
}

NetworkBank load_checkpoint(const std::string& path, nlohmann::json* meta) {
  return checkpoint_from_bytes(read_file(path), meta);
}

}  // namespace wbi
