#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dais/reversible.hpp"

namespace dais {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'I', 'S', 'R', 'E', 'V', '1'};
constexpr std::uint64_t kWordBase = std::uint64_t{1} << InfoBuffer::kWordBits;
constexpr std::uint64_t kMaxLower = std::uint64_t{1} << 32;
constexpr std::size_t kMetaBytes = 7 * 8 + 2 * 4;

void put_u32(std::ostream& out, std::uint32_t x) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

void put_u64(std::ostream& out, std::uint64_t x) {
  put_u32(out, static_cast<std::uint32_t>(x));
  put_u32(out, static_cast<std::uint32_t>(x >> 32));
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!in) throw BufferCorruption("truncated buffer file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

}  // namespace

InfoBuffer::InfoBuffer(std::uint32_t num, std::uint32_t den, std::size_t max_bytes)
    : num_(num), den_(den), max_bytes_(max_bytes) {
  if (num == 0 || den == 0) throw std::invalid_argument("bases must be >= 1");
  const std::uint64_t base = std::lcm<std::uint64_t>(num, den);
  if (base > kMaxLower) {
    throw std::invalid_argument("lcm of buffer bases exceeds 2^32");
  }
  lower_ = base;
  while (lower_ * 2 <= kMaxLower) lower_ *= 2;
  head_ = lower_;
}

void InfoBuffer::spill(std::uint16_t word) {
  if ((words_ + 1) * sizeof(std::uint16_t) > max_bytes_) {
    throw ResourceLimit("information buffer exceeds its cap of " +
                        std::to_string(max_bytes_) + " bytes");
  }
  if (pages_.empty() || pages_.back().size() == kPageWords) {
    pages_.emplace_back();
    pages_.back().reserve(kPageWords);
  }
  pages_.back().push_back(word);
  ++words_;
}

std::uint16_t InfoBuffer::unspill() {
  if (words_ == 0) throw BufferCorruption("information buffer underflow");
  const std::uint16_t w = pages_.back().back();
  pages_.back().pop_back();
  if (pages_.back().empty()) pages_.pop_back();
  --words_;
  return w;
}

void InfoBuffer::push(std::uint32_t a, std::uint32_t m) {
  if (m == 0 || lower_ % m != 0) {
    throw std::invalid_argument("base " + std::to_string(m) +
                                " is not supported by this buffer");
  }
  if (a >= m) throw std::invalid_argument("symbol out of range for its base");
  const std::uint64_t bound = (lower_ / m) * kWordBase;
  while (head_ >= bound) {
    spill(static_cast<std::uint16_t>(head_ & (kWordBase - 1)));
    head_ >>= kWordBits;
  }
  head_ = head_ * m + a;
}

std::uint32_t InfoBuffer::pop(std::uint32_t m) {
  if (m == 0 || lower_ % m != 0) {
    throw std::invalid_argument("base " + std::to_string(m) +
                                " is not supported by this buffer");
  }
  const auto a = static_cast<std::uint32_t>(head_ % m);
  head_ /= m;
  while (head_ < lower_) head_ = (head_ << kWordBits) | unspill();
  return a;
}

bool operator==(const InfoBuffer& a, const InfoBuffer& b) {
  return a.num_ == b.num_ && a.den_ == b.den_ && a.lower_ == b.lower_ &&
         a.head_ == b.head_ && a.words_ == b.words_ && a.pages_ == b.pages_ &&
         a.seed_start_ == b.seed_start_ && a.seed_end_ == b.seed_end_;
}

void InfoBuffer::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(kMetaBytes));
  put_u64(out, head_);
  put_u64(out, lower_);
  put_u64(out, words_);
  put_u64(out, pages_.size());
  put_u64(out, seed_start_.s);
  put_u64(out, seed_end_.s);
  put_u64(out, static_cast<std::uint64_t>(max_bytes_));
  put_u32(out, num_);
  put_u32(out, den_);
  for (const auto& page : pages_) {
    put_u32(out, static_cast<std::uint32_t>(page.size() * 2));
    for (std::uint16_t w : page) {
      const char b[2] = {static_cast<char>(w & 0xff), static_cast<char>(w >> 8)};
      out.write(b, 2);
    }
  }
  if (!out) throw std::runtime_error("failed to write information buffer");
}

InfoBuffer InfoBuffer::load(std::istream& in) {
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw BufferCorruption("missing DAISREV1 magic");
  }
  if (get_u32(in) != kMetaBytes) throw BufferCorruption("bad metadata page");
  const std::uint64_t head = get_u64(in);
  const std::uint64_t lower = get_u64(in);
  const std::uint64_t words = get_u64(in);
  const std::uint64_t pages = get_u64(in);
  const SeedState s0{get_u64(in)};
  const SeedState sK{get_u64(in)};
  const std::uint64_t max_bytes = get_u64(in);
  const std::uint32_t num = get_u32(in);
  const std::uint32_t den = get_u32(in);

  InfoBuffer buf(num, den, static_cast<std::size_t>(max_bytes));
  if (buf.lower_ != lower || head < lower || head >= lower * kWordBase) {
    throw BufferCorruption("buffer head outside its valid range");
  }
  if (pages != (words + kPageWords - 1) / kPageWords) {
    throw BufferCorruption("page count does not match word count");
  }
  buf.head_ = head;
  buf.set_seeds(s0, sK);
  for (std::uint64_t p = 0; p < pages; ++p) {
    const std::uint32_t bytes = get_u32(in);
    const std::uint64_t expect =
        2 * std::min<std::uint64_t>(kPageWords, words - p * kPageWords);
    if (bytes != expect) throw BufferCorruption("bad page length");
    std::vector<std::uint16_t> page(bytes / 2);
    for (auto& w : page) {
      unsigned char b[2];
      in.read(reinterpret_cast<char*>(b), 2);
      if (!in) throw BufferCorruption("truncated buffer page");
      w = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    buf.pages_.push_back(std::move(page));
  }
  buf.words_ = static_cast<std::size_t>(words);
  return buf;
}

void InfoBuffer::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(out);
}

InfoBuffer InfoBuffer::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load(in);
}

}  // namespace dais
