// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/wav.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace tddan::io {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 24) & 0xFF);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

struct Cursor {
  const unsigned char* p;
  std::size_t len;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > len) throw ParseError(std::string("truncated WAV: expected ") + what, pos);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                      (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(p[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(p[pos]) |
                      static_cast<std::uint16_t>(p[pos + 1] << 8);
    pos += 2;
    return v;
  }
  void tag(char out[5]) {
    need(4, "chunk tag");
    std::memcpy(out, p + pos, 4);
    out[4] = '\0';
    pos += 4;
  }
};

}  // namespace

WavData wav_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Cursor c{bytes.data(), bytes.size()};

  char tag[5];
  c.tag(tag);
  if (std::strcmp(tag, "RIFF") != 0) throw ParseError("missing RIFF tag", 0);
  c.u32("RIFF size");
  c.tag(tag);
  if (std::strcmp(tag, "WAVE") != 0) throw ParseError("missing WAVE tag", c.pos - 4);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  WavData out;

  while (c.pos + 8 <= c.len) {
    c.tag(tag);
    std::uint32_t chunk_size = c.u32("chunk size");
    if (std::strcmp(tag, "fmt ") == 0) {
      std::size_t fmt_start = c.pos;
      format = c.u16("format code");
      channels = c.u16("channel count");
      sample_rate = c.u32("sample rate");
      c.u32("byte rate");
      c.u16("block align");
      bits = c.u16("bits per sample");
      have_fmt = true;
      c.pos = fmt_start + chunk_size + (chunk_size & 1);
    } else if (std::strcmp(tag, "data") == 0) {
      if (!have_fmt) throw ParseError("data chunk before fmt chunk", c.pos - 8);
      if (channels != 1) throw ParseError("only mono supported", c.pos - 8);
      c.need(chunk_size, "data payload");
      const unsigned char* d = c.p + c.pos;
      if (format == kFormatFloat && bits == 32) {
        std::size_t n = chunk_size / 4;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::uint32_t u = static_cast<std::uint32_t>(d[4 * i]) |
                            (static_cast<std::uint32_t>(d[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(d[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(d[4 * i + 3]) << 24);
          float f;
          std::memcpy(&f, &u, 4);
          out.samples[i] = static_cast<double>(f);
        }
      } else if (format == kFormatPcm && bits == 16) {
        std::size_t n = chunk_size / 2;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::int16_t s = static_cast<std::int16_t>(
              static_cast<std::uint16_t>(d[2 * i]) |
              static_cast<std::uint16_t>(d[2 * i + 1] << 8));
          out.samples[i] = static_cast<double>(s) / 32768.0;
        }
      } else {
        throw ParseError("unsupported sample format (" + std::to_string(format) + "/" +
                             std::to_string(bits) + " bits)",
                         c.pos - 8);
      }
      out.sample_rate = static_cast<int>(sample_rate);
      return out;
    } else {
      // skip unknown chunk (padded to even size)
      std::size_t skip = chunk_size + (chunk_size & 1);
      c.need(skip, "chunk payload");
      c.pos += skip;
    }
  }
  throw ParseError("no data chunk found", c.pos);
}

void wav_write(const std::string& path, const Waveform& samples, int sample_rate) {
  if (sample_rate <= 0) throw InvalidArgument("wav_write: sample_rate must be positive");
  std::vector<unsigned char> bytes;
  bytes.reserve(60 + samples.size() * 4);

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
  put_u32(bytes, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  bytes.insert(bytes.end(), {'W', 'A', 'V', 'E'});

  bytes.insert(bytes.end(), {'f', 'm', 't', ' '});
  put_u32(bytes, 16);
  put_u16(bytes, kFormatFloat);
  put_u16(bytes, 1);
  put_u32(bytes, static_cast<std::uint32_t>(sample_rate));
  put_u32(bytes, static_cast<std::uint32_t>(sample_rate) * 4);
  put_u16(bytes, 4);
  put_u16(bytes, 32);

  // fact chunk is required for non-PCM formats
  bytes.insert(bytes.end(), {'f', 'a', 'c', 't'});
  put_u32(bytes, 4);
  put_u32(bytes, static_cast<std::uint32_t>(samples.size()));

  bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
  put_u32(bytes, data_bytes);
  for (double v : samples) {
    float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(bytes, u);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream outf(tmp, std::ios::binary | std::ios::trunc);
    if (!outf) throw Error("cannot open for writing: " + tmp);
    outf.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!outf) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tddan::io
