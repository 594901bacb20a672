// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SHA-256 digests and ECDSA P-256 keys and signatures.
//
// Signing is deterministic (RFC 6979 nonces) so that identical inputs always
// produce identical signed documents. Signatures are the fixed-width 64-byte
// big-endian r || s form.

#pragma once

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/param_build.h>
#include <openssl/rand.h>

#include <array>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "cdi/bytes.hpp"
#include "cdi/encoding.hpp"
#include "cdi/error.hpp"

namespace cdi {

inline constexpr std::string_view kSha256 = "sha-256";
inline constexpr std::string_view kEcdsaP256 = "ecdsa-p256";

struct Digest {
  std::string algorithm{kSha256};
  std::array<std::uint8_t, 32> bytes{};

  std::string Hex() const { return HexEncode(bytes); }

  // Accepts exactly 64 lowercase hex characters.
  static std::optional<Digest> FromHex(std::string_view text) {
    if (text.size() != 64) return std::nullopt;
    auto raw = HexDecode(text);
    if (!raw) return std::nullopt;
    Digest d;
    std::copy(raw->begin(), raw->end(), d.bytes.begin());
    return d;
  }

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

inline Bytes CanonicalEncode(const Digest& d) {
  return Encoder().Field(d.algorithm).Field(d.bytes).Take();
}

template <>
inline Digest CanonicalDecode<Digest>(ByteView data) {
  Decoder dec(data);
  Digest d;
  d.algorithm = dec.String();
  ByteView raw = dec.Field();
  dec.ExpectEnd();
  if (d.algorithm != kSha256) {
    throw Error(ErrorCode::kMalformed, "unsupported digest algorithm");
  }
  if (raw.size() != 32) throw Error(ErrorCode::kMalformed, "digest length");
  std::copy(raw.begin(), raw.end(), d.bytes.begin());
  return d;
}

namespace detail {

struct EvpMdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct EvpPkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct EvpPkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct EcPointDeleter {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct EcGroupDeleter {
  void operator()(EC_GROUP* p) const { EC_GROUP_free(p); }
};
struct EcdsaSigDeleter {
  void operator()(ECDSA_SIG* p) const { ECDSA_SIG_free(p); }
};
struct OsslParamBldDeleter {
  void operator()(OSSL_PARAM_BLD* p) const { OSSL_PARAM_BLD_free(p); }
};
struct OsslParamDeleter {
  void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};

using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, EvpMdCtxDeleter>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, EvpPkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, EvpPkeyCtxDeleter>;
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using EcPointPtr = std::unique_ptr<EC_POINT, EcPointDeleter>;
using EcGroupPtr = std::unique_ptr<EC_GROUP, EcGroupDeleter>;
using EcdsaSigPtr = std::unique_ptr<ECDSA_SIG, EcdsaSigDeleter>;

[[noreturn]] inline void ThrowCrypto(const char* what) {
  ERR_clear_error();
  throw Error(ErrorCode::kCrypto, what);
}

// Shared read-only curve parameters.
inline const EC_GROUP* P256() {
  static const EcGroupPtr group(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1));
  if (!group) ThrowCrypto("P-256 group unavailable");
  return group.get();
}

inline const BIGNUM* P256Order() { return EC_GROUP_get0_order(P256()); }

inline BnPtr BnFromBytes(ByteView b) {
  BnPtr bn(BN_bin2bn(b.data(), static_cast<int>(b.size()), nullptr));
  if (!bn) ThrowCrypto("BN_bin2bn");
  return bn;
}

inline std::array<std::uint8_t, 32> BnTo32(const BIGNUM* bn) {
  std::array<std::uint8_t, 32> out{};
  if (BN_bn2binpad(bn, out.data(), 32) != 32) ThrowCrypto("BN_bn2binpad");
  return out;
}

inline std::array<std::uint8_t, 32> HmacSha256(ByteView key, ByteView data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
           data.size(), out.data(), &len) == nullptr ||
      len != 32) {
    ThrowCrypto("HMAC-SHA256");
  }
  return out;
}

// Uncompressed SEC1 point for scalar * G.
inline Bytes PublicPointFor(const BIGNUM* scalar) {
  BnCtxPtr ctx(BN_CTX_new());
  EcPointPtr pub(EC_POINT_new(P256()));
  if (!ctx || !pub ||
      EC_POINT_mul(P256(), pub.get(), scalar, nullptr, nullptr, ctx.get()) != 1) {
    ThrowCrypto("EC_POINT_mul");
  }
  Bytes out(65);
  if (EC_POINT_point2oct(P256(), pub.get(), POINT_CONVERSION_UNCOMPRESSED,
                         out.data(), out.size(), ctx.get()) != 65) {
    ThrowCrypto("EC_POINT_point2oct");
  }
  return out;
}

inline bool IsValidPublicPoint(ByteView sec1) {
  if (sec1.size() != 65 || sec1[0] != 0x04) return false;
  BnCtxPtr ctx(BN_CTX_new());
  EcPointPtr point(EC_POINT_new(P256()));
  if (!ctx || !point) ThrowCrypto("EC_POINT_new");
  bool ok = EC_POINT_oct2point(P256(), point.get(), sec1.data(), sec1.size(),
                               ctx.get()) == 1 &&
            EC_POINT_is_on_curve(P256(), point.get(), ctx.get()) == 1 &&
            EC_POINT_is_at_infinity(P256(), point.get()) == 0;
  ERR_clear_error();
  return ok;
}

inline PkeyPtr MakePublicPkey(ByteView sec1) {
  std::unique_ptr<OSSL_PARAM_BLD, OsslParamBldDeleter> bld(OSSL_PARAM_BLD_new());
  if (!bld ||
      OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME,
                                      "prime256v1", 0) != 1 ||
      OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY,
                                       sec1.data(), sec1.size()) != 1) {
    ThrowCrypto("OSSL_PARAM_BLD");
  }
  std::unique_ptr<OSSL_PARAM, OsslParamDeleter> params(
      OSSL_PARAM_BLD_to_param(bld.get()));
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* raw = nullptr;
  if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1 ||
      EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params.get()) != 1) {
    ThrowCrypto("EVP_PKEY_fromdata");
  }
  return PkeyPtr(raw);
}

// Maps seed material to a scalar in [1, n-1] by hashing seed || counter until
// the candidate falls in range.
inline BnPtr ExpandSeedToScalar(ByteView seed);

}  // namespace detail

inline Digest HashBytes(ByteView data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != 32) {
    detail::ThrowCrypto("EVP_Digest");
  }
  return d;
}

inline Digest HashBytes(std::string_view data) {
  return HashBytes(
      ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

// Streams the file through SHA-256 in fixed-size chunks.
inline Digest HashFile(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::kFileNotFound, path.string());
  }
  if (std::filesystem::is_directory(path, ec)) {
    throw Error(ErrorCode::kFileUnreadable, path.string() + " is a directory");
  }
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(
      std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw Error(ErrorCode::kFileUnreadable, path.string());

  detail::MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    detail::ThrowCrypto("EVP_DigestInit_ex");
  }
  std::vector<std::uint8_t> buf(1 << 20);
  while (true) {
    std::size_t n = std::fread(buf.data(), 1, buf.size(), file.get());
    if (n > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), n) != 1) {
      detail::ThrowCrypto("EVP_DigestUpdate");
    }
    if (n < buf.size()) {
      if (std::ferror(file.get())) {
        throw Error(ErrorCode::kFileUnreadable, path.string());
      }
      break;
    }
  }
  Digest d;
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), d.bytes.data(), &len) != 1 || len != 32) {
    detail::ThrowCrypto("EVP_DigestFinal_ex");
  }
  return d;
}

namespace detail {

inline BnPtr ExpandSeedToScalar(ByteView seed) {
  static constexpr std::string_view kLabel = "cdi-keygen-v1";
  for (std::uint32_t counter = 0;; ++counter) {
    Bytes input(seed.begin(), seed.end());
    input.insert(input.end(), kLabel.begin(), kLabel.end());
    for (int shift = 24; shift >= 0; shift -= 8) {
      input.push_back(static_cast<std::uint8_t>(counter >> shift));
    }
    Digest candidate = HashBytes(input);
    BnPtr d = BnFromBytes(candidate.bytes);
    if (!BN_is_zero(d.get()) && BN_cmp(d.get(), P256Order()) < 0) return d;
  }
}

}  // namespace detail

class VerifyingKey {
 public:
  // Validates that the material is an uncompressed point on P-256.
  static VerifyingKey FromMaterial(std::string_view algorithm, Bytes material) {
    if (algorithm != kEcdsaP256) {
      throw Error(ErrorCode::kMalformed,
                  "unsupported key algorithm '" + std::string(algorithm) + "'");
    }
    if (!detail::IsValidPublicPoint(material)) {
      throw Error(ErrorCode::kMalformed, "not a valid P-256 public point");
    }
    return VerifyingKey(std::string(algorithm), std::move(material));
  }

  const std::string& algorithm() const { return algorithm_; }
  const Bytes& material() const { return material_; }
  const Digest& key_id() const { return key_id_; }

  friend bool operator==(const VerifyingKey& a, const VerifyingKey& b) {
    return a.algorithm_ == b.algorithm_ && a.material_ == b.material_;
  }

 private:
  VerifyingKey(std::string algorithm, Bytes material)
      : algorithm_(std::move(algorithm)), material_(std::move(material)) {
    key_id_ = HashBytes(Encoder().Field(algorithm_).Field(material_).Take());
  }

  std::string algorithm_;
  Bytes material_;
  Digest key_id_;
};

inline Bytes CanonicalEncode(const VerifyingKey& k) {
  return Encoder().Field(k.algorithm()).Field(k.material()).Take();
}

template <>
inline VerifyingKey CanonicalDecode<VerifyingKey>(ByteView data) {
  Decoder dec(data);
  std::string alg = dec.String();
  Bytes material = dec.FieldBytes();
  dec.ExpectEnd();
  return VerifyingKey::FromMaterial(alg, std::move(material));
}

// Private scalar plus its derived public key. Never serialized into protocol
// structures; only the key-file writer touches the scalar.
class SigningKey {
 public:
  static SigningKey FromMaterial(std::string_view algorithm, Bytes scalar) {
    if (algorithm != kEcdsaP256) {
      throw Error(ErrorCode::kMalformed,
                  "unsupported key algorithm '" + std::string(algorithm) + "'");
    }
    if (scalar.size() != 32) {
      throw Error(ErrorCode::kMalformed, "P-256 private scalar must be 32 bytes");
    }
    detail::BnPtr d = detail::BnFromBytes(scalar);
    if (BN_is_zero(d.get()) || BN_cmp(d.get(), detail::P256Order()) >= 0) {
      throw Error(ErrorCode::kMalformed, "private scalar out of range");
    }
    VerifyingKey pub = VerifyingKey::FromMaterial(kEcdsaP256,
                                                  detail::PublicPointFor(d.get()));
    return SigningKey(std::string(algorithm), std::move(scalar), std::move(pub));
  }

  const std::string& algorithm() const { return algorithm_; }
  const Bytes& material() const { return scalar_; }
  const VerifyingKey& verifying_key() const { return verifying_key_; }
  const Digest& key_id() const { return verifying_key_.key_id(); }

 private:
  SigningKey(std::string algorithm, Bytes scalar, VerifyingKey pub)
      : algorithm_(std::move(algorithm)),
        scalar_(std::move(scalar)),
        verifying_key_(std::move(pub)) {}

  std::string algorithm_;
  Bytes scalar_;
  VerifyingKey verifying_key_;
};

struct KeyPair {
  SigningKey signing;
  VerifyingKey verifying;
};

// With a seed the result is a pure function of the seed bytes; without one,
// 32 bytes are drawn from the system CSPRNG.
inline KeyPair GenerateKeypair(std::optional<ByteView> seed = std::nullopt) {
  Bytes material;
  if (seed) {
    material.assign(seed->begin(), seed->end());
  } else {
    material.resize(32);
    if (RAND_bytes(material.data(), 32) != 1) {
      ERR_clear_error();
      throw Error(ErrorCode::kEntropy, "system entropy source failed");
    }
  }
  detail::BnPtr d = detail::ExpandSeedToScalar(material);
  auto scalar = detail::BnTo32(d.get());
  SigningKey sk = SigningKey::FromMaterial(kEcdsaP256, Bytes(scalar.begin(), scalar.end()));
  VerifyingKey vk = sk.verifying_key();
  return KeyPair{std::move(sk), std::move(vk)};
}

struct Signature {
  std::string algorithm{kEcdsaP256};
  Bytes bytes;
  Digest signer_key_id;

  friend bool operator==(const Signature&, const Signature&) = default;
};

inline Bytes CanonicalEncode(const Signature& s) {
  return Encoder()
      .Field(s.algorithm)
      .Field(s.bytes)
      .Field(CanonicalEncode(s.signer_key_id))
      .Take();
}

template <>
inline Signature CanonicalDecode<Signature>(ByteView data) {
  Decoder dec(data);
  Signature s;
  s.algorithm = dec.String();
  s.bytes = dec.FieldBytes();
  s.signer_key_id = CanonicalDecode<Digest>(dec.Field());
  dec.ExpectEnd();
  return s;
}

// ECDSA-SHA256 with the RFC 6979 nonce for (key, SHA-256(payload)).
inline Signature SignPayload(const SigningKey& key, ByteView payload) {
  using namespace detail;
  if (key.algorithm() != kEcdsaP256 || key.material().size() != 32) {
    throw Error(ErrorCode::kKeyMismatch, "malformed signing key");
  }
  const BIGNUM* n = P256Order();
  BnCtxPtr ctx(BN_CTX_new());
  if (!ctx) ThrowCrypto("BN_CTX_new");

  Digest h1 = HashBytes(payload);
  BnPtr e = BnFromBytes(h1.bytes);
  BnPtr d = BnFromBytes(key.material());
  // bits2octets(h1): qlen == hlen, so reduce once modulo n.
  BnPtr e_mod(BN_new());
  if (!e_mod || BN_nnmod(e_mod.get(), e.get(), n, ctx.get()) != 1) {
    ThrowCrypto("BN_nnmod");
  }
  auto h1_octets = BnTo32(e_mod.get());
  const Bytes& x_octets = key.material();

  std::array<std::uint8_t, 32> v;
  std::array<std::uint8_t, 32> k;
  v.fill(0x01);
  k.fill(0x00);
  auto seeded = [&](std::uint8_t sep) {
    Bytes m(v.begin(), v.end());
    m.push_back(sep);
    m.insert(m.end(), x_octets.begin(), x_octets.end());
    m.insert(m.end(), h1_octets.begin(), h1_octets.end());
    return m;
  };
  k = HmacSha256(k, seeded(0x00));
  v = HmacSha256(k, v);
  k = HmacSha256(k, seeded(0x01));
  v = HmacSha256(k, v);

  BnPtr r(BN_new());
  BnPtr s(BN_new());
  BnPtr tmp(BN_new());
  BnPtr kinv(BN_new());
  BnPtr rx(BN_new());
  EcPointPtr point(EC_POINT_new(P256()));
  if (!r || !s || !tmp || !kinv || !rx || !point) ThrowCrypto("alloc");
  while (true) {
    v = HmacSha256(k, v);
    BnPtr candidate = BnFromBytes(v);
    bool in_range = !BN_is_zero(candidate.get()) && BN_cmp(candidate.get(), n) < 0;
    if (in_range) {
      if (EC_POINT_mul(P256(), point.get(), candidate.get(), nullptr, nullptr,
                       ctx.get()) != 1 ||
          EC_POINT_get_affine_coordinates(P256(), point.get(), rx.get(), nullptr,
                                          ctx.get()) != 1 ||
          BN_nnmod(r.get(), rx.get(), n, ctx.get()) != 1) {
        ThrowCrypto("ECDSA r");
      }
      if (!BN_is_zero(r.get())) {
        // s = k^-1 (e + r d) mod n
        if (BN_mod_mul(tmp.get(), r.get(), d.get(), n, ctx.get()) != 1 ||
            BN_mod_add(tmp.get(), tmp.get(), e_mod.get(), n, ctx.get()) != 1 ||
            BN_mod_inverse(kinv.get(), candidate.get(), n, ctx.get()) == nullptr ||
            BN_mod_mul(s.get(), kinv.get(), tmp.get(), n, ctx.get()) != 1) {
          ThrowCrypto("ECDSA s");
        }
        if (!BN_is_zero(s.get())) break;
      }
    }
    Bytes retry(v.begin(), v.end());
    retry.push_back(0x00);
    k = HmacSha256(k, retry);
    v = HmacSha256(k, v);
  }

  Signature sig;
  sig.algorithm = std::string(kEcdsaP256);
  auto r_bytes = BnTo32(r.get());
  auto s_bytes = BnTo32(s.get());
  sig.bytes.assign(r_bytes.begin(), r_bytes.end());
  sig.bytes.insert(sig.bytes.end(), s_bytes.begin(), s_bytes.end());
  sig.signer_key_id = key.key_id();
  return sig;
}

// True iff the signature is a valid ECDSA-SHA256 signature on payload under
// key and names key as its signer.
inline bool VerifySignature(const Signature& sig, ByteView payload,
                            const VerifyingKey& key) {
  using namespace detail;
  if (sig.algorithm != kEcdsaP256 || key.algorithm() != kEcdsaP256) return false;
  if (sig.signer_key_id != key.key_id()) return false;
  if (sig.bytes.size() != 64) return false;

  EcdsaSigPtr ecdsa(ECDSA_SIG_new());
  BIGNUM* r = BN_bin2bn(sig.bytes.data(), 32, nullptr);
  BIGNUM* s = BN_bin2bn(sig.bytes.data() + 32, 32, nullptr);
  if (!ecdsa || !r || !s || ECDSA_SIG_set0(ecdsa.get(), r, s) != 1) {
    BN_free(r);
    BN_free(s);
    ThrowCrypto("ECDSA_SIG_set0");
  }
  unsigned char* der = nullptr;
  int der_len = i2d_ECDSA_SIG(ecdsa.get(), &der);
  if (der_len <= 0) ThrowCrypto("i2d_ECDSA_SIG");
  std::unique_ptr<unsigned char, void (*)(unsigned char*)> der_owner(
      der, [](unsigned char* p) { OPENSSL_free(p); });

  PkeyPtr pkey = MakePublicPkey(key.material());
  MdCtxPtr md(EVP_MD_CTX_new());
  if (!md || EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr,
                                  pkey.get()) != 1) {
    ThrowCrypto("EVP_DigestVerifyInit");
  }
  int rc = EVP_DigestVerify(md.get(), der, static_cast<std::size_t>(der_len),
                            payload.data(), payload.size());
  ERR_clear_error();
  return rc == 1;
}

}  // namespace cdi
