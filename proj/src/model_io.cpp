// Copyright 2026 The Porekit Authors
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

#include "porekit/model_io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace porekit {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

class Reader {
 public:
  Reader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    PK_CHECK(in_.gcount() == static_cast<std::streamsize>(n), ErrorKind::kFormat,
             "truncated container " + path_ + " at offset " +
                 std::to_string(offset_));
    offset_ += n;
  }

  template <typename T>
  T scalar() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  std::string str(std::size_t n) {
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

const TensorF& Container::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  fail(ErrorKind::kFormat, "container has no tensor named '" + name + "'");
}

bool Container::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::string Container::meta(const std::string& key,
                            const std::string& fallback) const {
  for (const auto& kv : metadata) {
    if (kv.first == key) return kv.second;
  }
  return fallback;
}

void save_container(const std::string& path, const Container& c) {
  std::ofstream out(path, std::ios::binary);
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "cannot write " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& nt : c.tensors) {
    PK_CHECK(nt.name.size() <= 0xFFFF, ErrorKind::kInvalidArgument,
             "tensor name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put<std::uint8_t>(out, 0);  // dtype: float32
    put<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor.rank()));
    for (int d = 0; d < nt.tensor.rank(); ++d) {
      put<std::uint64_t>(out, static_cast<std::uint64_t>(nt.tensor.dim(d)));
    }
    out.write(reinterpret_cast<const char*>(nt.tensor.data()),
              static_cast<std::streamsize>(nt.tensor.size() * sizeof(float)));
  }
  std::string meta;
  for (const auto& kv : c.metadata) meta += kv.first + "=" + kv.second + "\n";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  PK_CHECK(out.good(), ErrorKind::kInvalidData, "write failed: " + path);
}

Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  PK_CHECK(in.good(), ErrorKind::kInvalidData, "cannot open " + path);
  Reader r(in, path);

  char magic[4];
  r.bytes(magic, 4);
  PK_CHECK(std::equal(magic, magic + 4, kMagic), ErrorKind::kFormat,
           "bad magic in " + path + " at offset 0");
  const auto version = r.scalar<std::uint32_t>();
  PK_CHECK(version == kVersion, ErrorKind::kFormat,
           "unsupported container version " + std::to_string(version) + " in " +
               path);

  Container c;
  const auto count = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto name_len = r.scalar<std::uint16_t>();
    nt.name = r.str(name_len);
    const auto dtype = r.scalar<std::uint8_t>();
    PK_CHECK(dtype == 0, ErrorKind::kFormat,
             "unsupported dtype code " + std::to_string(dtype) + " for '" +
                 nt.name + "' at offset " + std::to_string(r.offset()));
    const auto rank = r.scalar<std::uint8_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      const auto dim = r.scalar<std::uint64_t>();
      PK_CHECK(dim <= 0x7FFFFFFFULL, ErrorKind::kFormat, "dimension overflow");
      d = static_cast<int>(dim);
    }
    nt.tensor = TensorF(shape);
    r.bytes(nt.tensor.data(),
            static_cast<std::size_t>(nt.tensor.size()) * sizeof(float));
    c.tensors.push_back(std::move(nt));
  }
  const auto meta_len = r.scalar<std::uint32_t>();
  std::istringstream meta(r.str(meta_len));
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.empty()) continue;
    c.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

void save_model(Sequential<float>& net,
                const std::vector<std::pair<std::string, std::string>>& metadata,
                const std::string& path) {
  Container c;
  for (auto ref : net.param_refs()) {
    c.tensors.push_back({ref.name, *ref.tensor});
  }
  c.metadata = metadata;
  save_container(path, c);
}

void load_model_params(Sequential<float>& net, const Container& c) {
  for (auto ref : net.param_refs()) {
    const TensorF& stored = c.find(ref.name);
    PK_CHECK(stored.same_shape(*ref.tensor), ErrorKind::kFormat,
             "shape mismatch for '" + ref.name + "': file " +
                 stored.shape_str() + " vs model " + ref.tensor->shape_str());
    ref.tensor->array() = stored.array();
  }
}

}  // namespace porekit
