// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "tddan/common.hpp"

namespace tddan::io {

struct WavData {
  Waveform samples;
  int sample_rate = 0;
};

/// Reads a mono WAV file (16-bit PCM or 32-bit IEEE float).
/// Throws ParseError with the byte offset on malformed input.
WavData wav_read(const std::string& path);

/// Writes a mono 32-bit float WAV file atomically (temp file + rename).
void wav_write(const std::string& path, const Waveform& samples, int sample_rate);

}  // namespace tddan::io
