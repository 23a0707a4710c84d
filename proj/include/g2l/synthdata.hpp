#pragma once

// Synthetic moment/query embeddings with controllable semantic overlap and
// annotation sparsity, plus the versioned G2LD1 dataset file.
//
// File layout:
//   "G2LD1" | u64 LE header length | header JSON | f64 LE moments | f64 LE queries

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "g2l/errors.hpp"
#include "g2l/numcore.hpp"
#include "json.hpp"

namespace g2l {

struct SynthConfig {
  std::size_t videos = 64;
  std::size_t moments_per_video = 16;
  std::size_t queries_per_video = 4;
  std::size_t dim = 32;
  std::size_t topics = 8;
  double overlap = 0.4;
  double annotated_fraction = 0.25;
  double noise = 0.15;
  std::uint64_t seed = 0;
  bool orthogonal_topics = false;

  std::size_t annotated_per_video() const {
    const auto a = static_cast<std::size_t>(std::llround(annotated_fraction * static_cast<double>(moments_per_video)));
    return std::clamp<std::size_t>(a, 1, moments_per_video);
  }

  void validate() const {
    if (moments_per_video < 2) throw DomainError("synth config: moments per video must be >= 2");
    if (dim < 1) throw DomainError("synth config: dim must be >= 1");
    if (topics < 1) throw DomainError("synth config: topics must be >= 1");
    if (!(overlap >= 0.0 && overlap <= 1.0)) throw DomainError("synth config: overlap must lie in [0, 1]");
    if (!(annotated_fraction > 0.0 && annotated_fraction <= 1.0))
      throw DomainError("synth config: annotated fraction must lie in (0, 1]");
    if (!(noise >= 0.0)) throw DomainError("synth config: noise must be >= 0");
    if (queries_per_video < 1 || queries_per_video > annotated_per_video())
      throw DomainError("synth config: queries per video must be in [1, annotated moments per video = " +
                        std::to_string(annotated_per_video()) + "]");
    if (orthogonal_topics && dim < topics)
      throw DomainError("synth config: orthogonal topics need dim >= topics");
  }

  bool operator==(const SynthConfig&) const = default;
};

struct SynthDataset {
  SynthConfig config;
  EmbeddingMatrix moments;  // videos * moments_per_video rows, video-major
  EmbeddingMatrix queries;
  std::vector<std::size_t> query_video;
  std::vector<std::size_t> query_target;    // global moment row
  std::vector<std::size_t> moment_topic;    // hidden ground-truth semantics
  std::vector<std::size_t> video_topic;     // dominant topic per video
  std::vector<std::uint8_t> moment_annotated;

  std::size_t videos() const { return config.videos; }
  std::size_t moments_per_video() const { return config.moments_per_video; }
  std::size_t dim() const { return config.dim; }
  std::size_t query_count() const { return queries.rows(); }
  std::size_t video_of_moment(std::size_t row) const { return row / config.moments_per_video; }

  bool operator==(const SynthDataset&) const = default;
};

namespace detail {

inline Matrix draw_topics(const SynthConfig& cfg, RngStream& rng) {
  Matrix t = random_normal_matrix(cfg.topics, cfg.dim, rng);
  if (cfg.orthogonal_topics) {
    for (std::size_t i = 0; i < t.rows(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const double p = dot(t.row(i), t.row(j));
        for (std::size_t k = 0; k < cfg.dim; ++k) t(i, k) -= p * t(j, k);
      }
      const double n = norm(t.row(i));
      for (double& v : t.row(i)) v /= n;
    }
    return t;
  }
  return l2_normalize_rows(t);
}

inline void noisy_unit(std::span<const double> topic, double sigma, RngStream& rng, std::span<double> out) {
  for (std::size_t k = 0; k < topic.size(); ++k) out[k] = topic[k] + sigma * rng.normal();
  double n = norm(out);
  if (!(n > kMinRowNorm)) {
    // Degenerate draw; fall back to the noiseless direction.
    std::ranges::copy(topic, out.begin());
    n = norm(out);
  }
  for (double& v : out) v /= n;
}

}  // namespace detail

// Each video has a dominant topic carried by its annotated (target) moments.
// A non-target moment takes the dominant topic with probability `overlap`
// and a different topic otherwise. Queries are noisy copies of their
// target's topic.
inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  RngStream topic_rng(cfg.seed, 1);
  RngStream layout_rng(cfg.seed, 2);
  RngStream noise_rng(cfg.seed, 3);

  const Matrix topics = detail::draw_topics(cfg, topic_rng);
  const std::size_t nm = cfg.moments_per_video;
  const std::size_t annotated = cfg.annotated_per_video();

  SynthDataset ds;
  ds.config = cfg;
  ds.moments = EmbeddingMatrix{Matrix(cfg.videos * nm, cfg.dim), true};
  ds.queries = EmbeddingMatrix{Matrix(cfg.videos * cfg.queries_per_video, cfg.dim), true};
  ds.moment_topic.resize(cfg.videos * nm);
  ds.moment_annotated.assign(cfg.videos * nm, 0);

  std::vector<std::size_t> slots(nm);
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    const std::size_t dominant = static_cast<std::size_t>(layout_rng.uniform_index(cfg.topics));
    ds.video_topic.push_back(dominant);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    layout_rng.shuffle(slots);
    std::vector<std::size_t> targets(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(annotated));
    std::sort(targets.begin(), targets.end());

    for (std::size_t k = 0; k < nm; ++k) {
      const std::size_t row = v * nm + k;
      std::size_t topic = dominant;
      if (std::binary_search(targets.begin(), targets.end(), k)) {
        ds.moment_annotated[row] = 1;
      } else if (!(layout_rng.uniform() < cfg.overlap) && cfg.topics > 1) {
        topic = static_cast<std::size_t>(layout_rng.uniform_index(cfg.topics - 1));
        if (topic >= dominant) ++topic;
      }
      ds.moment_topic[row] = topic;
      detail::noisy_unit(topics.row(topic), cfg.noise, noise_rng, ds.moments.values.row(row));
    }
    for (std::size_t q = 0; q < cfg.queries_per_video; ++q) {
      const std::size_t qrow = v * cfg.queries_per_video + q;
      ds.query_video.push_back(v);
      ds.query_target.push_back(v * nm + targets[q]);
      detail::noisy_unit(topics.row(dominant), cfg.noise, noise_rng, ds.queries.values.row(qrow));
    }
  }
  return ds;
}

// Fraction of non-target moments sharing their video's dominant topic.
inline double measured_overlap(const SynthDataset& ds) {
  std::size_t shared = 0, total = 0;
  for (std::size_t row = 0; row < ds.moment_topic.size(); ++row) {
    if (ds.moment_annotated[row]) continue;
    ++total;
    shared += ds.moment_topic[row] == ds.video_topic[ds.video_of_moment(row)];
  }
  return total ? static_cast<double>(shared) / static_cast<double>(total) : 0.0;
}

inline constexpr char kDatasetMagic[] = "G2LD1";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

// Cursor over an in-memory file; every failure names the byte offset.
class Reader {
 public:
  Reader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(what_ + ": " + msg + " at byte offset " + std::to_string(pos_));
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated file (need " + std::to_string(n) + " more bytes)");
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (bytes_.compare(pos_, magic.size(), magic) != 0) fail("bad magic, expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_matrix(Matrix& m) {
    need(m.size() * 8);
    for (double& v : m.data()) v = f64();
  }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Write to a sibling temp file, then rename into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

}  // namespace detail

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"videos", c.videos},     {"moments_per_video", c.moments_per_video},
          {"queries_per_video", c.queries_per_video},
          {"dim", c.dim},           {"topics", c.topics},
          {"overlap", c.overlap},   {"annotated_fraction", c.annotated_fraction},
          {"noise", c.noise},       {"seed", c.seed},
          {"orthogonal_topics", c.orthogonal_topics}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.videos = j.at("videos").get<std::size_t>();
  c.moments_per_video = j.at("moments_per_video").get<std::size_t>();
  c.queries_per_video = j.at("queries_per_video").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.topics = j.at("topics").get<std::size_t>();
  c.overlap = j.at("overlap").get<double>();
  c.annotated_fraction = j.at("annotated_fraction").get<double>();
  c.noise = j.at("noise").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.orthogonal_topics = j.at("orthogonal_topics").get<bool>();
  return c;
}

inline std::string serialize(const SynthDataset& ds) {
  nlohmann::json header;
  header["format"] = kDatasetMagic;
  header["config"] = to_json(ds.config);
  header["moment_rows"] = ds.moments.rows();
  header["query_rows"] = ds.queries.rows();
  header["dim"] = ds.dim();
  header["query_video"] = ds.query_video;
  header["query_target"] = ds.query_target;
  header["moment_topic"] = ds.moment_topic;
  header["video_topic"] = ds.video_topic;
  header["moment_annotated"] = ds.moment_annotated;
  const std::string text = header.dump();

  std::string out(kDatasetMagic);
  detail::put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * (ds.moments.values.size() + ds.queries.values.size()));
  for (double v : ds.moments.values.data()) detail::put_f64(out, v);
  for (double v : ds.queries.values.data()) detail::put_f64(out, v);
  return out;
}

inline SynthDataset deserialize(const std::string& bytes) {
  detail::Reader r(bytes, "dataset");
  r.expect_magic(kDatasetMagic);
  const std::uint64_t header_len = r.u64();
  const std::size_t header_at = r.offset();
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(r.take(header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("dataset: malformed header JSON at byte offset " + std::to_string(header_at + e.byte) + ": " +
                     e.what());
  }

  SynthDataset ds;
  try {
    ds.config = synth_config_from_json(h.at("config"));
    const auto mrows = h.at("moment_rows").get<std::size_t>();
    const auto qrows = h.at("query_rows").get<std::size_t>();
    const auto dim = h.at("dim").get<std::size_t>();
    if (dim != ds.config.dim || mrows != ds.config.videos * ds.config.moments_per_video)
      r.fail("header counts disagree with config");
    ds.query_video = h.at("query_video").get<std::vector<std::size_t>>();
    ds.query_target = h.at("query_target").get<std::vector<std::size_t>>();
    ds.moment_topic = h.at("moment_topic").get<std::vector<std::size_t>>();
    ds.video_topic = h.at("video_topic").get<std::vector<std::size_t>>();
    ds.moment_annotated = h.at("moment_annotated").get<std::vector<std::uint8_t>>();
    if (ds.query_video.size() != qrows || ds.query_target.size() != qrows || ds.moment_topic.size() != mrows ||
        ds.moment_annotated.size() != mrows || ds.video_topic.size() != ds.config.videos)
      r.fail("header metadata lengths disagree with row counts");
    for (std::size_t i = 0; i < qrows; ++i)
      if (ds.query_target[i] >= mrows || ds.query_target[i] / ds.config.moments_per_video != ds.query_video[i])
        r.fail("query " + std::to_string(i) + " target outside its video");
    ds.moments = EmbeddingMatrix{Matrix(mrows, dim), true};
    ds.queries = EmbeddingMatrix{Matrix(qrows, dim), true};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset: bad header field: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("dataset: ") + e.what());
  }
  r.read_matrix(ds.moments.values);
  r.read_matrix(ds.queries.values);
  if (!r.at_end()) r.fail("trailing bytes after payload");
  return ds;
}

inline void save(const SynthDataset& ds, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize(ds));
}

inline SynthDataset load(const std::filesystem::path& path) { return deserialize(detail::read_file(path)); }

}  // namespace g2l
