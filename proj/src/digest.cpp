#include "tandem/digest.hpp"

#include <openssl/evp.h>

#include <cstdio>

namespace tandem {

struct Sha256::Impl
{
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha256::Sha256() : impl_(std::make_unique<Impl>())
{
  EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
}

Sha256::~Sha256() = default;

Sha256& Sha256::update(std::string_view bytes)
{
  EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
  return *this;
}

std::string Sha256::hex()
{
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, md, &len);
  std::string out;
  out.reserve(len * 2);
  char buf[3];
  for (unsigned i = 0; i < len; ++i)
    {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
  return out;
}

} // namespace tandem
