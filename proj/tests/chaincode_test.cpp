#include <gtest/gtest.h>

#include "test_support.hpp"

namespace vx = vaxledger;
using vx::testing::LedgerFixture;

namespace {

vx::ProposalResponse register_hash(const vx::WorldState& state, const vx::MemberStateId& caller, const vx::Bytes& hash,
                                   const vx::Did& issuer, bool signed_ok = true) {
  vx::ChaincodeContext ctx(caller, signed_ok, state);
  return vx::register_certificate(ctx, hash, issuer, vx::Document::object());
}

vx::Bytes digest_bytes(const vx::CertificateHash& h) { return vx::Bytes(h.digest.begin(), h.digest.end()); }

}  // namespace

TEST(RegisterCenter, OnlyTheOwningMemberStateMayRegister) {
  vx::WorldState empty;
  auto center = vx::center_identity(vx::MemberStateId("DE")).record;
  vx::ChaincodeContext foreign(vx::MemberStateId("FR"), true, empty);
  EXPECT_EQ(vx::register_medical_center(foreign, center).status, vx::ChaincodeStatus::access_denied);
  vx::ChaincodeContext unsigned_ctx(vx::MemberStateId("DE"), false, empty);
  EXPECT_EQ(vx::register_medical_center(unsigned_ctx, center).status, vx::ChaincodeStatus::access_denied);
  vx::ChaincodeContext own(vx::MemberStateId("DE"), true, empty);
  auto ok = vx::register_medical_center(own, center);
  ASSERT_TRUE(ok.ok());
  EXPECT_EQ(ok.write_set.size(), 2u);
  for (const auto& w : ok.write_set) EXPECT_TRUE(w.key.starts_with("DE/"));
}

TEST(RegisterCenter, RejectsNonconformantAndDuplicateRecords) {
  LedgerFixture f;
  vx::MemberStateId de("DE");
  auto center = vx::center_identity(de).record;
  vx::ChaincodeContext dup(de, true, f.ledger.state());
  EXPECT_EQ(vx::register_medical_center(dup, center).status, vx::ChaincodeStatus::already_registered);
  for (const std::string& id : std::vector<std::string>{"", "has space", "a:b", std::string(129, 'x')}) {
    auto bad = center;
    bad.center_id = id;
    vx::ChaincodeContext ctx(de, true, f.ledger.state());
    auto r = vx::register_medical_center(ctx, bad);
    EXPECT_EQ(r.status, vx::ChaincodeStatus::nonconformant_message) << id;
    EXPECT_TRUE(r.write_set.empty());
  }
}

TEST(RegisterCertificate, StatusesFollowTheCallerNamespace) {
  LedgerFixture f;
  vx::MemberStateId de("DE"), fr("FR");
  const auto& state = f.ledger.state();
  auto c = f.credential(de, "subject");
  auto h = digest_bytes(vx::hash_credential(c));

  EXPECT_EQ(register_hash(state, de, h, c.issuer, false).status, vx::ChaincodeStatus::access_denied);
  EXPECT_EQ(register_hash(state, de, vx::Bytes(31), c.issuer).status, vx::ChaincodeStatus::nonconformant_message);
  EXPECT_EQ(register_hash(state, de, h, vx::Did{}).status, vx::ChaincodeStatus::nonconformant_message);
  // DE's issuer is unknown inside FR's namespace.
  EXPECT_EQ(register_hash(state, fr, h, c.issuer).status, vx::ChaincodeStatus::unknown_issuer);
  EXPECT_EQ(register_hash(state, de, h, vx::generate_did("vax", "rogue")).status, vx::ChaincodeStatus::unknown_issuer);

  auto ok = register_hash(state, de, h, c.issuer);
  ASSERT_TRUE(ok.ok());
  ASSERT_EQ(ok.write_set.size(), 1u);
  EXPECT_EQ(ok.write_set[0].key, vx::cert_key(de, vx::hash_credential(c)));
  EXPECT_EQ(ok.read_set.size(), 3u);  // issuer index, center, cert key

  f.commit({vx::Envelope{f.registration(de, c)}});
  EXPECT_EQ(register_hash(f.ledger.state(), de, h, c.issuer).status, vx::ChaincodeStatus::already_registered);
}

TEST(VerifyCertificate, WorstCaseScanCountsEveryRecord) {
  LedgerFixture f;
  std::vector<vx::CertificateHash> hashes;
  for (std::size_t i = 0; i < 30; ++i) hashes.push_back(f.register_one(vx::MemberStateId::at(i % 27), "v" + std::to_string(i)));
  for (const auto& h : {hashes.front(), hashes.back()}) {
    vx::ChaincodeContext ctx(vx::MemberStateId("AT"), true, f.ledger.state());
    auto r = vx::verify_certificate(ctx, h);
    EXPECT_TRUE(r.found());
    EXPECT_EQ(r.scan_count, 30u);
    EXPECT_TRUE(r.response.write_set.empty());
    EXPECT_EQ(r.response.read_set.size(), 1u);
  }
  vx::ChaincodeContext ctx(vx::MemberStateId("AT"), true, f.ledger.state());
  auto miss = vx::verify_certificate(ctx, vx::CertificateHash{vx::sha256("absent")});
  EXPECT_FALSE(miss.found());
  EXPECT_EQ(miss.scan_count, 30u);
}

TEST(VerifyCertificate, ExactLookupProbesKeys) {
  LedgerFixture f;
  auto owner = vx::MemberStateId::at(5);
  auto h = f.register_one(owner, "exact");
  auto run = [&](std::optional<vx::MemberStateId> hint) {
    vx::ChaincodeContext ctx(vx::MemberStateId("AT"), true, f.ledger.state());
    return vx::verify_certificate(ctx, h, vx::QueryMode::exact_lookup, hint);
  };
  auto hinted = run(owner);
  EXPECT_TRUE(hinted.found());
  EXPECT_EQ(hinted.scan_count, 1u);
  auto walked = run(std::nullopt);
  EXPECT_TRUE(walked.found());
  EXPECT_EQ(walked.scan_count, 6u);
  EXPECT_FALSE(run(vx::MemberStateId::at(6)).found());
}

TEST(MakeTransaction, PayloadSizeIsEncodingPlusOverhead) {
  LedgerFixture f;
  vx::MemberStateId de("DE");
  auto c = f.credential(de, "size");
  vx::ChaincodeContext ctx(de, true, f.ledger.state());
  auto h = vx::hash_credential(c);
  auto resp = vx::register_certificate(ctx, vx::ByteView(h.digest), c.issuer, vx::metadata_document(c));
  auto bare = vx::make_transaction(resp, vx::register_certificate_call(h, c.issuer), de, f.key(de), "n", 0);
  auto padded = vx::make_transaction(resp, vx::register_certificate_call(h, c.issuer), de, f.key(de), "n", 1000);
  EXPECT_EQ(padded.payload_size, bare.payload_size + 1000);
  EXPECT_EQ(bare.tx_id, padded.tx_id);
  EXPECT_EQ(vx::validate_transaction(bare, f.ledger.policy(), f.ledger.state()), vx::TxValidity::valid);
  auto other = vx::make_transaction(resp, vx::register_certificate_call(h, c.issuer), de, f.key(de), "m", 0);
  EXPECT_NE(other.tx_id, bare.tx_id);
}
