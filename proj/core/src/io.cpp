#include "trackfm/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace trackfm {

namespace {

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void check_write(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !s.empty();
}

// Shortest round-trip formatting for doubles, locale independent.
std::string format_double(double v) {
  char buf[40];
  int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<size_t>(n));
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

const char* to_string(SnapshotFormat f) {
  return f == SnapshotFormat::binary ? "binary" : "text";
}

SnapshotFormat snapshot_format_from_string(std::string_view s) {
  if (s == "binary") return SnapshotFormat::binary;
  if (s == "text") return SnapshotFormat::text;
  throw ConfigError("unknown snapshot format: " + std::string(s));
}

// --- events ----------------------------------------------------------------

std::vector<RawEvent> read_events_tsv(const std::filesystem::path& path,
                                      EventReadStats* stats) {
  std::ifstream in = open_in(path);
  EventReadStats local;
  EventReadStats& st = stats ? *stats : local;
  st = EventReadStats{};

  std::vector<RawEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    ++st.lines;
    auto fields = split_tabs(line);
    if (fields.size() != 6) {
      ++st.skipped;
      continue;
    }
    RawEvent e;
    bool ok = parse_number(fields[3], e.timestamp) &&
              parse_number(fields[4], e.listened_duration) &&
              parse_number(fields[5], e.track_duration);
    if (!ok) {
      // An optional header is recognized on the first line only, by its
      // non-numeric timestamp field.
      if (st.lines == 1) {
        st.had_header = true;
      } else {
        ++st.skipped;
      }
      continue;
    }
    e.user_id = std::string(fields[0]);
    e.track_id = std::string(fields[1]);
    e.kind = event_kind_from_string(fields[2]);
    if (e.user_id.empty() || e.track_id.empty()) {
      ++st.skipped;
      continue;
    }
    events.push_back(std::move(e));
  }
  return events;
}

void write_events_tsv(const std::filesystem::path& path,
                      std::span<const RawEvent> events) {
  std::ofstream out = open_out(path);
  for (const RawEvent& e : events) {
    out << e.user_id << '\t' << e.track_id << '\t' << to_string(e.kind) << '\t'
        << e.timestamp << '\t' << e.listened_duration << '\t'
        << e.track_duration << '\n';
  }
  check_write(out, path);
}

// --- interactions ------------------------------------------------------------

std::vector<PositiveInteraction> read_interactions_tsv(
    const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<PositiveInteraction> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    PositiveInteraction pi;
    if (fields.size() != 3 || !parse_number(fields[2], pi.first_timestamp)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected user, track, timestamp");
    }
    pi.user_id = std::string(fields[0]);
    pi.track_id = std::string(fields[1]);
    out.push_back(std::move(pi));
  }
  return out;
}

void write_interactions_tsv(const std::filesystem::path& path,
                            std::span<const PositiveInteraction> interactions) {
  std::ofstream out = open_out(path);
  for (const auto& pi : interactions) {
    out << pi.user_id << '\t' << pi.track_id << '\t' << pi.first_timestamp
        << '\n';
  }
  check_write(out, path);
}

// --- co-occurrence matrix -----------------------------------------------------

void write_cooc(const std::filesystem::path& path, const CoocMatrix& m) {
  std::ofstream out = open_out(path);
  const auto entries = m.sorted_entries();
  out << "#cooc v1 " << m.num_tracks() << ' ' << entries.size() << '\n';
  for (uint32_t t = 0; t < m.num_tracks(); ++t) {
    out << t << '\t' << m.vocab().name(t) << '\n';
  }
  for (const CoocEntry& e : entries) {
    out << e.i << '\t' << e.j << '\t' << format_double(e.weight) << '\n';
  }
  check_write(out, path);
}

CoocMatrix read_cooc(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  strip_cr(line);
  std::istringstream header(line);
  std::string magic, version;
  uint32_t num_tracks = 0;
  uint64_t num_entries = 0;
  header >> magic >> version >> num_tracks >> num_entries;
  if (magic != "#cooc" || version != "v1" || !header) {
    throw DataError(path.string() + ": bad cooc header");
  }
  CoocMatrix m;
  for (uint32_t t = 0; t < num_tracks; ++t) {
    if (!std::getline(in, line)) {
      throw DataError(path.string() + ": truncated vocabulary block");
    }
    strip_cr(line);
    auto fields = split_tabs(line);
    uint32_t idx = 0;
    if (fields.size() != 2 || !parse_number(fields[0], idx) || idx != t) {
      throw DataError(path.string() + ": bad vocabulary line for index " +
                      std::to_string(t));
    }
    if (m.add_track(fields[1]) != t) {
      throw DataError(path.string() + ": duplicate track id " +
                      std::string(fields[1]));
    }
  }
  for (uint64_t n = 0; n < num_entries; ++n) {
    if (!std::getline(in, line)) {
      throw DataError(path.string() + ": truncated entry block");
    }
    strip_cr(line);
    auto fields = split_tabs(line);
    uint32_t i = 0, j = 0;
    double w = 0.0;
    if (fields.size() != 3 || !parse_number(fields[0], i) ||
        !parse_number(fields[1], j) || !parse_number(fields[2], w) || i >= j ||
        w <= 0.0) {
      throw DataError(path.string() + ": bad entry line " + std::to_string(n));
    }
    m.add_pair(i, j, w);
  }
  return m;
}

// --- fm parameter snapshot ------------------------------------------------------

namespace {

void write_doubles_binary(std::ofstream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_doubles_binary(std::ifstream& in, std::span<double> values,
                         const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != values.size() * sizeof(double)) {
    throw DataError(path.string() + ": truncated binary block");
  }
}

}  // namespace

void write_fm_params(const std::filesystem::path& path, const FMParams& params,
                     uint32_t catalog_size, uint32_t side_count,
                     SnapshotFormat format) {
  if (params.slots != 2 * catalog_size + side_count) {
    throw DataError("fm snapshot: slot count != 2C + F");
  }
  std::ofstream out = open_out(path, format == SnapshotFormat::binary);
  out << "#fm v1 " << params.slots << ' ' << params.k << ' ' << catalog_size
      << ' ' << side_count << ' ' << to_string(format) << '\n';
  if (format == SnapshotFormat::binary) {
    std::vector<double> record(1 + params.k);
    for (uint32_t s = 0; s < params.slots; ++s) {
      record[0] = params.bias[s];
      auto v = params.vec(s);
      std::copy(v.begin(), v.end(), record.begin() + 1);
      write_doubles_binary(out, record);
    }
  } else {
    for (uint32_t s = 0; s < params.slots; ++s) {
      out << format_double(params.bias[s]);
      for (double v : params.vec(s)) out << ' ' << format_double(v);
      out << '\n';
    }
  }
  check_write(out, path);
}

FMSnapshot read_fm_params(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  strip_cr(line);
  std::istringstream header(line);
  std::string magic, version, format_str;
  FMSnapshot snap;
  uint32_t slots = 0, k = 0;
  header >> magic >> version >> slots >> k >> snap.catalog_size >>
      snap.side_count >> format_str;
  if (magic != "#fm" || version != "v1" || !header) {
    throw DataError(path.string() + ": bad fm header");
  }
  if (slots != 2 * snap.catalog_size + snap.side_count) {
    throw DataError(path.string() + ": inconsistent fm header dimensions");
  }
  const SnapshotFormat format = snapshot_format_from_string(format_str);
  snap.params.slots = slots;
  snap.params.k = k;
  snap.params.bias.resize(slots);
  snap.params.latent.resize(static_cast<size_t>(slots) * k);
  if (format == SnapshotFormat::binary) {
    std::vector<double> record(1 + k);
    for (uint32_t s = 0; s < slots; ++s) {
      read_doubles_binary(in, record, path);
      snap.params.bias[s] = record[0];
      std::copy(record.begin() + 1, record.end(), snap.params.vec(s).begin());
    }
  } else {
    for (uint32_t s = 0; s < slots; ++s) {
      if (!std::getline(in, line)) {
        throw DataError(path.string() + ": truncated fm snapshot");
      }
      strip_cr(line);
      std::istringstream ls(line);
      ls >> snap.params.bias[s];
      for (auto& v : snap.params.vec(s)) ls >> v;
      if (!ls) throw DataError(path.string() + ": bad fm text record");
    }
  }
  return snap;
}

// --- embedding snapshot ------------------------------------------------------------

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings, SnapshotFormat format) {
  std::ofstream out = open_out(path, format == SnapshotFormat::binary);
  out << "#emb v1 " << embeddings.size() << ' ' << embeddings.dim << ' '
      << to_string(format) << '\n';
  for (uint32_t t = 0; t < embeddings.size(); ++t) {
    if (format == SnapshotFormat::binary) {
      out << embeddings.vocab.name(t) << '\n';
      write_doubles_binary(out, embeddings.vec(t));
    } else {
      out << embeddings.vocab.name(t);
      for (double v : embeddings.vec(t)) out << '\t' << format_double(v);
      out << '\n';
    }
  }
  check_write(out, path);
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  strip_cr(line);
  std::istringstream header(line);
  std::string magic, version, format_str;
  uint32_t count = 0, dim = 0;
  header >> magic >> version >> count >> dim >> format_str;
  if (magic != "#emb" || version != "v1" || !header) {
    throw DataError(path.string() + ": bad embedding header");
  }
  const SnapshotFormat format = snapshot_format_from_string(format_str);
  EmbeddingSet emb;
  emb.dim = dim;
  emb.data.resize(static_cast<size_t>(count) * dim);
  for (uint32_t t = 0; t < count; ++t) {
    if (!std::getline(in, line)) {
      throw DataError(path.string() + ": truncated embedding snapshot");
    }
    strip_cr(line);
    if (format == SnapshotFormat::binary) {
      if (emb.vocab.add(line) != t) {
        throw DataError(path.string() + ": duplicate track id " + line);
      }
      read_doubles_binary(in, emb.vec(t), path);
    } else {
      auto fields = split_tabs(line);
      if (fields.size() != dim + 1) {
        throw DataError(path.string() + ": bad embedding record " + line);
      }
      if (emb.vocab.add(fields[0]) != t) {
        throw DataError(path.string() + ": duplicate track id " +
                        std::string(fields[0]));
      }
      auto dst = emb.vec(t);
      for (uint32_t d = 0; d < dim; ++d) {
        if (!parse_number(fields[d + 1], dst[d])) {
          throw DataError(path.string() + ": bad embedding value");
        }
      }
    }
  }
  return emb;
}

// --- side features ------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> read_side_features_tsv(
    const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < 2 || fields[0].empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected track_id followed by feature ids");
    }
    for (size_t f = 1; f < fields.size(); ++f) {
      if (fields[f].empty()) continue;
      out.emplace_back(std::string(fields[0]), std::string(fields[f]));
    }
  }
  return out;
}

void write_side_features_tsv(
    const std::filesystem::path& path,
    std::span<const std::pair<std::string, std::string>> pairs) {
  std::ofstream out = open_out(path);
  for (const auto& [track, feature] : pairs) {
    out << track << '\t' << feature << '\n';
  }
  check_write(out, path);
}

// --- evaluation report -----------------------------------------------------------------

void write_report_tsv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out = open_out(path);
  out << "bin\tcount\tmpr\n";
  char buf[32];
  for (const BinResult& b : r.bins) {
    std::snprintf(buf, sizeof buf, "%.6f", b.mpr);
    out << b.edge << '\t' << b.track_count << '\t' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", r.overall_mpr);
  out << "avg\t" << r.evaluated_tracks << '\t' << buf << '\n';
  check_write(out, path);
}

EvalReport read_report_tsv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty report");
  strip_cr(line);
  if (line != "bin\tcount\tmpr") {
    throw DataError(path.string() + ": bad report header");
  }
  EvalReport r;
  bool saw_avg = false;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    strip_cr(line);
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": bad report row");
    }
    if (fields[0] == "avg") {
      if (!parse_number(fields[1], r.evaluated_tracks) ||
          !parse_number(fields[2], r.overall_mpr)) {
        throw DataError(path.string() + ": bad avg row");
      }
      saw_avg = true;
      continue;
    }
    BinResult b;
    if (!parse_number(fields[0], b.edge) ||
        !parse_number(fields[1], b.track_count) ||
        !parse_number(fields[2], b.mpr)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": bad report row");
    }
    r.bins.push_back(b);
  }
  if (!saw_avg) throw DataError(path.string() + ": missing avg row");
  return r;
}

}  // namespace trackfm
