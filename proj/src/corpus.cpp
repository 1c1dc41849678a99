// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ssdkan/harness.hpp"

namespace ssdkan {

std::string split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Eval:
      return "eval";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "eval") return Split::Eval;
  throw ConfigError("unknown split '" + name +
                    "' (expected train, dev, or eval)");
}

void CorpusSpec::validate() const {
  if (train_size < 1 || dev_size < 1 || eval_size < 1) {
    throw ConfigError("corpus: split sizes must be >= 1");
  }
  if (sample_rate < 1000) {
    throw ConfigError("corpus: sample rate must be >= 1000");
  }
  if (!(duration_min > 0.0) || !(duration_max >= duration_min) ||
      !(duration_step > 0.0)) {
    throw ConfigError("corpus: invalid duration grid");
  }
  if (noise_level < 0.0 || noise_level > 0.5) {
    throw ConfigError("corpus: noise_level must lie in [0, 0.5]");
  }
}

CorpusSpec CorpusSpec::from_config(const ConfigMap& cfg) {
  CorpusSpec s;
  s.train_size = static_cast<int>(cfg.get_int("train_size", s.train_size));
  s.dev_size = static_cast<int>(cfg.get_int("dev_size", s.dev_size));
  s.eval_size = static_cast<int>(cfg.get_int("eval_size", s.eval_size));
  s.sample_rate = static_cast<int>(cfg.get_int("sample_rate", s.sample_rate));
  s.duration_min = cfg.get_double("duration_min", s.duration_min);
  s.duration_max = cfg.get_double("duration_max", s.duration_max);
  s.duration_step = cfg.get_double("duration_step", s.duration_step);
  s.noise_level = cfg.get_double("noise_level", s.noise_level);
  s.validate();
  return s;
}

CorpusSpec CorpusSpec::from_file(const std::filesystem::path& path) {
  ConfigMap cfg = ConfigMap::from_file(path);
  CorpusSpec s = from_config(cfg);
  cfg.reject_unknown();
  return s;
}

const std::vector<TrialWave>& Corpus::split(Split s) const {
  switch (s) {
    case Split::Train:
      return train;
    case Split::Dev:
      return dev;
    case Split::Eval:
      return eval;
  }
  return train;
}

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Complex rotation oscillator; sin comes from the imaginary part.
struct Oscillator {
  double re, im;     // current phase as a unit complex number
  double wre, wim;   // per-sample rotation

  Oscillator(double phase, double radians_per_sample)
      : re(std::cos(phase)),
        im(std::sin(phase)),
        wre(std::cos(radians_per_sample)),
        wim(std::sin(radians_per_sample)) {}

  double value() const { return im; }

  void advance() {
    const double nre = re * wre - im * wim;
    const double nim = re * wim + im * wre;
    re = nre;
    im = nim;
  }

  void jump(double delta) {
    const double jre = std::cos(delta);
    const double jim = std::sin(delta);
    const double nre = re * jre - im * jim;
    const double nim = re * jim + im * jre;
    re = nre;
    im = nim;
  }
};

enum class Artifact { None, Notch, Quantize, PhaseJump };

std::vector<double> synth_trial(Rng& rng, Artifact artifact, int64_t samples,
                                int sample_rate, double noise_level) {
  const double f0 = rng.uniform(80.0, 300.0);
  const int harmonics = 4 + static_cast<int>(rng.uniform_int(5));  // 4..8
  std::vector<Oscillator> tone;
  std::vector<Oscillator> env;
  std::vector<double> amp(harmonics);
  std::vector<double> depth(harmonics);
  tone.reserve(harmonics);
  env.reserve(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = rng.uniform(0.3, 1.0) / (h + 1);
    tone.emplace_back(rng.uniform(0.0, kTau),
                      kTau * f0 * (h + 1) / sample_rate);
    depth[h] = rng.uniform(0.2, 0.5);
    env.emplace_back(rng.uniform(0.0, kTau),
                     kTau * rng.uniform(0.5, 3.0) / sample_rate);
  }

  int64_t jump_period = 0;
  if (artifact == Artifact::PhaseJump) {
    jump_period = static_cast<int64_t>(rng.uniform(0.015, 0.035) * sample_rate);
  }

  std::vector<double> wave(samples);
  for (int64_t t = 0; t < samples; ++t) {
    if (jump_period > 0 && t > 0 && t % jump_period == 0) {
      for (int h = 0; h < harmonics; ++h) {
        tone[h].jump(rng.uniform(0.0, kTau));
      }
    }
    double acc = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      acc += amp[h] * (1.0 + depth[h] * env[h].value()) * tone[h].value();
      tone[h].advance();
      env[h].advance();
    }
    wave[t] = acc;
  }

  double peak = 0.0;
  for (double v : wave) peak = std::max(peak, std::fabs(v));
  const double gain = peak > 0.0 ? 0.6 / peak : 0.0;
  for (double& v : wave) v *= gain;

  if (artifact == Artifact::Notch) {
    // Wide RBJ biquad notch registered on a strong low harmonic, applied
    // twice for a steep, broad spectral gouge.
    const int target = 2 + static_cast<int>(rng.uniform_int(2));  // 2nd or 3rd
    const double fc = f0 * target;
    const double q = rng.uniform(0.5, 1.2);
    const double w0 = kTau * fc / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha;
    const double b0 = 1.0 / a0;
    const double b1 = -2.0 * cw / a0;
    const double b2 = 1.0 / a0;
    const double a1 = -2.0 * cw / a0;
    const double a2 = (1.0 - alpha) / a0;
    for (int pass = 0; pass < 2; ++pass) {
      double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
      for (double& v : wave) {
        const double x0 = v;
        const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        v = y0;
      }
    }
  } else if (artifact == Artifact::Quantize) {
    // 4-bit mid-tread quantizer over [-1, 1].
    for (double& v : wave) {
      v = std::round((v + 1.0) * 7.5) / 7.5 - 1.0;
    }
  }

  if (noise_level > 0.0) {
    for (double& v : wave) v += noise_level * rng.normal();
  }
  for (double& v : wave) v = std::min(1.0, std::max(-1.0, v));
  return wave;
}

TrialWave make_trial(const CorpusSpec& spec, uint64_t corpus_seed,
                     int split_index, int trial_index) {
  const char* prefixes[] = {"TRN", "DEV", "EVL"};
  Rng rng = Rng(corpus_seed).fork((static_cast<uint64_t>(split_index) << 32) |
                                  static_cast<uint64_t>(trial_index));
  TrialWave trial;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "%s_%06d", prefixes[split_index],
                trial_index);
  trial.id = idbuf;
  trial.label =
      trial_index % 2 == 0 ? TrialLabel::Bonafide : TrialLabel::Spoof;

  const int steps = static_cast<int>(
      std::lround((spec.duration_max - spec.duration_min) /
                  spec.duration_step)) + 1;
  const double duration =
      spec.duration_min +
      spec.duration_step * static_cast<double>(rng.uniform_int(steps));
  const int64_t samples =
      std::max<int64_t>(1, std::llround(duration * spec.sample_rate));

  Artifact artifact = Artifact::None;
  if (trial.label == TrialLabel::Spoof) {
    switch (rng.uniform_int(3)) {
      case 0:
        artifact = Artifact::Notch;
        trial.artifact = "notch";
        break;
      case 1:
        artifact = Artifact::Quantize;
        trial.artifact = "quantize";
        break;
      default:
        artifact = Artifact::PhaseJump;
        trial.artifact = "phase";
        break;
    }
  }
  trial.samples =
      synth_trial(rng, artifact, samples, spec.sample_rate, spec.noise_level);
  return trial;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec, uint64_t seed) {
  spec.validate();
  Corpus corpus;
  corpus.spec = spec;
  corpus.seed = seed;
  const int sizes[] = {spec.train_size, spec.dev_size, spec.eval_size};
  std::vector<TrialWave>* splits[] = {&corpus.train, &corpus.dev,
                                      &corpus.eval};
  for (int s = 0; s < 3; ++s) {
    splits[s]->reserve(sizes[s]);
    for (int i = 0; i < sizes[s]; ++i) {
      splits[s]->push_back(make_trial(spec, seed, s, i));
    }
  }
  return corpus;
}

// ---- corpus I/O -----------------------------------------------------------
//
// <dir>/meta.txt       key = value spec + seed
// <dir>/manifest.tsv   id <tab> split <tab> label <tab> offset <tab> length
// <dir>/waveforms.f32  raw little-endian float32, concatenated

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "meta.txt", std::ios::binary);
    if (!meta) throw IoError("cannot write '" + (dir / "meta.txt").string() + "'");
    char buf[64];
    meta << "format_version = 1\n";
    meta << "seed = " << corpus.seed << "\n";
    meta << "train_size = " << corpus.spec.train_size << "\n";
    meta << "dev_size = " << corpus.spec.dev_size << "\n";
    meta << "eval_size = " << corpus.spec.eval_size << "\n";
    meta << "sample_rate = " << corpus.spec.sample_rate << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", corpus.spec.duration_min);
    meta << "duration_min = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", corpus.spec.duration_max);
    meta << "duration_max = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", corpus.spec.duration_step);
    meta << "duration_step = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", corpus.spec.noise_level);
    meta << "noise_level = " << buf << "\n";
  }
  std::ofstream manifest(dir / "manifest.tsv", std::ios::binary);
  std::ofstream waves(dir / "waveforms.f32", std::ios::binary);
  if (!manifest || !waves) {
    throw IoError("cannot write corpus files under '" + dir.string() + "'");
  }
  int64_t offset = 0;
  std::vector<float> buf;
  for (Split s : {Split::Train, Split::Dev, Split::Eval}) {
    for (const TrialWave& t : corpus.split(s)) {
      manifest << t.id << '\t' << split_name(s) << '\t'
               << label_name(t.label) << '\t' << t.artifact << '\t'
               << offset << '\t' << t.samples.size() << '\n';
      buf.resize(t.samples.size());
      for (size_t i = 0; i < t.samples.size(); ++i) {
        buf[i] = static_cast<float>(t.samples[i]);
      }
      waves.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
      offset += static_cast<int64_t>(t.samples.size());
    }
  }
  if (!manifest || !waves) {
    throw IoError("write failed under '" + dir.string() + "'");
  }
}

Corpus read_corpus(const std::filesystem::path& dir) {
  ConfigMap meta = ConfigMap::from_file(dir / "meta.txt");
  if (meta.get_int("format_version") != 1) {
    throw IoError("corpus '" + dir.string() + "': unsupported format_version");
  }
  Corpus corpus;
  corpus.seed = meta.get_u64("seed");
  corpus.spec.train_size = static_cast<int>(meta.get_int("train_size"));
  corpus.spec.dev_size = static_cast<int>(meta.get_int("dev_size"));
  corpus.spec.eval_size = static_cast<int>(meta.get_int("eval_size"));
  corpus.spec.sample_rate = static_cast<int>(meta.get_int("sample_rate"));
  corpus.spec.duration_min = meta.get_double("duration_min");
  corpus.spec.duration_max = meta.get_double("duration_max");
  corpus.spec.duration_step = meta.get_double("duration_step");
  corpus.spec.noise_level = meta.get_double("noise_level");
  meta.reject_unknown();

  std::ifstream waves(dir / "waveforms.f32", std::ios::binary);
  if (!waves) {
    throw IoError("cannot open '" + (dir / "waveforms.f32").string() + "'");
  }
  std::ifstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) {
    throw IoError("cannot open '" + (dir / "manifest.tsv").string() + "'");
  }
  std::string line;
  int64_t lineno = 0;
  std::vector<float> buf;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    TrialWave trial;
    std::string split_str, label_str;
    int64_t offset = 0;
    int64_t length = 0;
    {
      size_t pos = 0;
      auto next_field = [&](const char* what) {
        const size_t tab = line.find('\t', pos);
        const bool last = tab == std::string::npos;
        std::string f = line.substr(pos, last ? std::string::npos : tab - pos);
        if (f.empty()) {
          throw ParseError((dir / "manifest.tsv").string() + ":" +
                           std::to_string(lineno) + ": missing " + what);
        }
        pos = last ? line.size() : tab + 1;
        return f;
      };
      trial.id = next_field("trial id");
      split_str = next_field("split");
      label_str = next_field("label");
      trial.artifact = next_field("artifact");
      offset = std::stoll(next_field("offset"));
      length = std::stoll(next_field("length"));
    }
    if (label_str == "bonafide") {
      trial.label = TrialLabel::Bonafide;
    } else if (label_str == "spoof") {
      trial.label = TrialLabel::Spoof;
    } else {
      throw ParseError((dir / "manifest.tsv").string() + ":" +
                       std::to_string(lineno) + ": unknown label '" +
                       label_str + "'");
    }
    buf.resize(length);
    waves.seekg(offset * static_cast<int64_t>(sizeof(float)));
    waves.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(length * sizeof(float)));
    if (waves.gcount() != static_cast<std::streamsize>(length * sizeof(float))) {
      throw IoError("corpus '" + dir.string() + "': waveform data truncated");
    }
    trial.samples.assign(buf.begin(), buf.end());
    switch (split_from_name(split_str)) {
      case Split::Train:
        corpus.train.push_back(std::move(trial));
        break;
      case Split::Dev:
        corpus.dev.push_back(std::move(trial));
        break;
      case Split::Eval:
        corpus.eval.push_back(std::move(trial));
        break;
    }
  }
  return corpus;
}

std::vector<double> pad_or_trim(std::span<const double> wave,
                                int64_t target_samples) {
  if (wave.empty()) throw ContractError("pad_or_trim: empty waveform");
  if (target_samples < 1) {
    throw ContractError("pad_or_trim: target must be >= 1");
  }
  std::vector<double> out(target_samples);
  const int64_t n = static_cast<int64_t>(wave.size());
  for (int64_t i = 0; i < target_samples; ++i) {
    out[i] = wave[i % n];
  }
  return out;
}

}  // namespace ssdkan
