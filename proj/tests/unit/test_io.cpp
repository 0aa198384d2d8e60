#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "wbi/error.hpp"
#include "wbi/io.hpp"
#include "wbi/progen.hpp"
#include "wbi/samplers.hpp"

using namespace wbi;

TEST(SampleCache, RoundTripIsExact) {
  const std::string dir = test::temp_dir("io-cache");
  GeneratedProgram g = generate(class_spec("milky"), 3);
  SampleCache c{program_hash(g.program), snis_prior(g.program, 300, 4)};
  c.set.log_weights[5] = -INFINITY;
  write_cache(dir + "/a.cache", c);
  SampleCache r = read_cache(dir + "/a.cache");
  EXPECT_EQ(r.program_hash, c.program_hash);
  EXPECT_EQ(r.set.samples, c.set.samples);
  EXPECT_EQ(r.set.log_weights, c.set.log_weights);
  EXPECT_EQ(r.set.log_normaliser, c.set.log_normaliser);
  EXPECT_EQ(r.set.tag, ProposalTag::prior);
  EXPECT_EQ(r.set.seed, 4u);
  // Same content, same bytes.
  write_cache(dir + "/b.cache", r);
  EXPECT_EQ(read_file(dir + "/a.cache"), read_file(dir + "/b.cache"));
}

TEST(SampleCache, HeaderLayout) {
  const std::string dir = test::temp_dir("io-layout");
  SampleCache c;
  c.program_hash = 0x1122334455667788ULL;
  c.set.samples.resize(2, 1);
  c.set.samples << 1.0, 2.0;
  c.set.log_weights = {0.0, 0.0};
  c.set.tag = ProposalTag::hmc;
  c.set.seed = 9;
  write_cache(dir + "/c.cache", c);
  std::string bytes = read_file(dir + "/c.cache");
  // magic, version, hash, n, M, tag, seed, M*n latents, M weights, N, log N
  EXPECT_EQ(bytes.size(), 8u + 4 + 8 + 8 + 8 + 4 + 8 + 2 * 8 + 2 * 8 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 8), "WBICACHE");
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 0x88);
}

TEST(SampleCache, CorruptFilesRejected) {
  const std::string dir = test::temp_dir("io-corrupt");
  write_file(dir + "/x.cache", "NOTACACHE-------");
  EXPECT_THROW(read_cache(dir + "/x.cache"), FormatError);
  GeneratedProgram g = generate(class_spec("gauss"), 1);
  write_cache(dir + "/y.cache", {program_hash(g.program), snis_prior(g.program, 10, 1)});
  std::string bytes = read_file(dir + "/y.cache");
  write_file(dir + "/z.cache", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_cache(dir + "/z.cache"), FormatError);
  write_file(dir + "/w.cache", bytes + "extra");
  EXPECT_THROW(read_cache(dir + "/w.cache"), FormatError);
  EXPECT_THROW(read_cache(dir + "/missing.cache"), FormatError);
}

TEST(Checkpoint, RoundTripPreservesEveryParameter) {
  NetworkBank bank = NetworkBank::create({7, 2, 10, 10, 50}, 5, ProcedureRegistry::builtin(),
                                         InputScaling::signed_log);
  nlohmann::json meta = {{"epoch", 12}, {"seed", 5}};
  std::string bytes = checkpoint_bytes(bank, meta);
  nlohmann::json back_meta;
  NetworkBank back = checkpoint_from_bytes(bytes, &back_meta);
  EXPECT_EQ(back_meta, meta);
  EXPECT_EQ(back.dims(), bank.dims());
  EXPECT_EQ(back.scaling(), InputScaling::signed_log);
  EXPECT_EQ(back.procedures(), bank.procedures());
  auto a = bank.parameters();
  auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value, b[i]->value);
  }
  EXPECT_EQ(checkpoint_bytes(back, meta), bytes);
}

TEST(Checkpoint, ManifestDescribesArrays) {
  NetworkBank bank = NetworkBank::create({4, 1}, 1);
  std::string bytes = checkpoint_bytes(bank);
  ASSERT_EQ(bytes.substr(0, 8), "WBICKPT1");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  auto manifest = nlohmann::json::parse(bytes.substr(16, len));
  std::size_t total = 0;
  for (const auto& a : manifest.at("arrays")) total += a.at("rows").get<std::size_t>() * a.at("cols").get<std::size_t>();
  EXPECT_EQ(total, bank.parameter_count());
  EXPECT_EQ(bytes.size(), 16 + len + 8 * total);
}

TEST(Checkpoint, TamperingDetected) {
  NetworkBank bank = NetworkBank::create({4, 1}, 1);
  std::string bytes = checkpoint_bytes(bank);
  EXPECT_THROW(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 8)), FormatError);
  EXPECT_THROW(checkpoint_from_bytes("WBICKPT1"), FormatError);
  std::string bad = bytes;
  bad[20] = '#';  // inside the JSON manifest
  EXPECT_THROW(checkpoint_from_bytes(bad), FormatError);
}
