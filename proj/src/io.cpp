#include "tractshape/io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "tractshape/config.hpp"
#include "tractshape/error.hpp"

namespace tractshape {

namespace fs = std::filesystem;

namespace {

// ---- float32 codec --------------------------------------------------------

float decode_f32(const unsigned char* p, bool big_endian) {
  std::uint32_t bits;
  if (big_endian)
    bits = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  else
    bits = (std::uint32_t(p[3]) << 24) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[1]) << 8) | std::uint32_t(p[0]);
  return std::bit_cast<float>(bits);
}

void encode_f32_le(float v, std::string& out) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

// ---- header ---------------------------------------------------------------

struct TrackHeader {
  bool big_endian = false;
  std::size_t data_offset = 0;
};

TrackHeader parse_track_header(std::string_view bytes,
                               std::string_view magic) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= bytes.size())
      fail(Errc::malformed_header, "header ended before `END` line");
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos)
      fail(Errc::malformed_header, "header ended before `END` line");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  if (next_line() != magic)
    fail(Errc::malformed_header,
         "missing magic line `" + std::string(magic) + "`");

  TrackHeader hdr;
  bool have_datatype = false, have_offset = false;
  for (;;) {
    const std::string_view line = next_line();
    if (line == "END") break;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos)
      fail(Errc::malformed_header, "header line without `:`");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "datatype") {
      if (value == "Float32LE")
        hdr.big_endian = false;
      else if (value == "Float32BE")
        hdr.big_endian = true;
      else
        fail(Errc::unsupported_format, "datatype `" + value + "`");
      have_datatype = true;
    } else if (key == "file") {
      // form: `. <offset>` (offset relative to file start)
      const auto parts = split(value, ' ');
      if (parts.size() != 2 || parts[0] != ".")
        fail(Errc::malformed_header, "bad `file:` field `" + value + "`");
      std::size_t off = 0;
      const auto& digits = parts[1];
      auto [ptr, ec] =
          std::from_chars(digits.data(), digits.data() + digits.size(), off);
      if (ec != std::errc{} || ptr != digits.data() + digits.size())
        fail(Errc::malformed_header, "bad offset `" + digits + "`");
      hdr.data_offset = off;
      have_offset = true;
    }
    // other keys (count, timestamps, ...) are carried but not interpreted
  }
  if (!have_datatype)
    fail(Errc::malformed_header, "missing `datatype:` field");
  if (!have_offset) fail(Errc::malformed_header, "missing `file:` field");
  if (hdr.data_offset < pos || hdr.data_offset > bytes.size())
    fail(Errc::malformed_header, "data offset outside the file");
  return hdr;
}

// Builds the header text whose `file: . N` offset equals its own length.
std::string build_header(std::string_view magic,
                         const std::vector<std::pair<std::string, std::string>>&
                             fields) {
  auto render = [&](std::size_t offset) {
    std::string h = std::string(magic) + "\n";
    for (const auto& [k, v] : fields) h += k + ": " + v + "\n";
    h += "file: . " + std::to_string(offset) + "\n";
    h += "END\n";
    return h;
  };
  std::size_t offset = render(0).size();
  for (int i = 0; i < 4; ++i) {  // digits of the offset may change its length
    const std::string h = render(offset);
    if (h.size() == offset) return h;
    offset = h.size();
  }
  return render(offset);
}

enum class TripletKind { value, separator, terminator };

TripletKind classify(const float* v, int n) {
  int nans = 0, infs = 0, finite = 0;
  for (int i = 0; i < n; ++i) {
    if (std::isnan(v[i]))
      ++nans;
    else if (std::isinf(v[i]))
      ++infs;
    else
      ++finite;
  }
  if (finite == n) return TripletKind::value;
  if (nans == n) return TripletKind::separator;
  if (infs == n) return TripletKind::terminator;
  fail(Errc::corrupt_data, "non-finite coordinate outside a sentinel");
}

}  // namespace

std::vector<Streamline> parse_tck(std::string_view bytes) {
  const TrackHeader hdr = parse_track_header(bytes, "mrtrix tracks");
  const auto* data =
      reinterpret_cast<const unsigned char*>(bytes.data()) + hdr.data_offset;
  const std::size_t payload = bytes.size() - hdr.data_offset;

  std::vector<Streamline> out;
  std::vector<Eigen::Vector3d> current;
  bool terminated = false;
  std::size_t n_triplets = payload / 12;
  for (std::size_t t = 0; t < n_triplets && !terminated; ++t) {
    float v[3];
    for (int i = 0; i < 3; ++i)
      v[i] = decode_f32(data + 12 * t + 4 * i, hdr.big_endian);
    switch (classify(v, 3)) {
      case TripletKind::value:
        current.emplace_back(v[0], v[1], v[2]);
        break;
      case TripletKind::separator:
        if (current.empty())
          fail(Errc::corrupt_data, "empty streamline (consecutive separators)");
        {
          Streamline s(3, static_cast<Eigen::Index>(current.size()));
          for (std::size_t i = 0; i < current.size(); ++i)
            s.col(static_cast<Eigen::Index>(i)) = current[i];
          out.push_back(std::move(s));
        }
        current.clear();
        break;
      case TripletKind::terminator:
        if (!current.empty()) {  // tolerate a missing final separator
          Streamline s(3, static_cast<Eigen::Index>(current.size()));
          for (std::size_t i = 0; i < current.size(); ++i)
            s.col(static_cast<Eigen::Index>(i)) = current[i];
          out.push_back(std::move(s));
          current.clear();
        }
        terminated = true;
        break;
    }
  }
  if (!terminated) {
    if (payload % 12 != 0)
      fail(Errc::truncated_data, "payload is not a whole number of triplets");
    fail(Errc::truncated_data, "missing Inf terminator triplet");
  }
  return out;
}

std::string write_tck(const std::vector<Streamline>& streamlines) {
  for (std::size_t i = 0; i < streamlines.size(); ++i) {
    if (streamlines[i].cols() == 0)
      fail(Errc::invalid_input,
           "streamline " + std::to_string(i) + " is empty");
    if (!streamlines[i].allFinite())
      fail(Errc::invalid_input,
           "streamline " + std::to_string(i) + " has non-finite points");
  }

  std::string out = build_header(
      "mrtrix tracks", {{"datatype", "Float32LE"},
                        {"count", std::to_string(streamlines.size())}});
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  for (const Streamline& s : streamlines) {
    for (Eigen::Index c = 0; c < s.cols(); ++c)
      for (int r = 0; r < 3; ++r)
        encode_f32_le(static_cast<float>(s(r, c)), out);
    for (int r = 0; r < 3; ++r) encode_f32_le(nan, out);
  }
  for (int r = 0; r < 3; ++r) encode_f32_le(inf, out);
  return out;
}

std::vector<ScalarTrack> parse_tsf(std::string_view bytes) {
  const TrackHeader hdr = parse_track_header(bytes, "mrtrix track scalars");
  const auto* data =
      reinterpret_cast<const unsigned char*>(bytes.data()) + hdr.data_offset;
  const std::size_t payload = bytes.size() - hdr.data_offset;

  std::vector<ScalarTrack> out;
  std::vector<double> current;
  bool terminated = false;
  const std::size_t n_values = payload / 4;
  for (std::size_t t = 0; t < n_values && !terminated; ++t) {
    const float v = decode_f32(data + 4 * t, hdr.big_endian);
    switch (classify(&v, 1)) {
      case TripletKind::value:
        current.push_back(v);
        break;
      case TripletKind::separator:
        if (current.empty())
          fail(Errc::corrupt_data, "empty track (consecutive separators)");
        out.push_back(Eigen::Map<const Eigen::VectorXd>(
            current.data(), static_cast<Eigen::Index>(current.size())));
        current.clear();
        break;
      case TripletKind::terminator:
        if (!current.empty()) {
          out.push_back(Eigen::Map<const Eigen::VectorXd>(
              current.data(), static_cast<Eigen::Index>(current.size())));
          current.clear();
        }
        terminated = true;
        break;
    }
  }
  if (!terminated) {
    if (payload % 4 != 0)
      fail(Errc::truncated_data, "payload is not a whole number of values");
    fail(Errc::truncated_data, "missing Inf terminator value");
  }
  return out;
}

std::string write_tsf(const std::vector<ScalarTrack>& tracks) {
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].size() == 0)
      fail(Errc::invalid_input, "track " + std::to_string(i) + " is empty");
    if (!tracks[i].allFinite())
      fail(Errc::invalid_input,
           "track " + std::to_string(i) + " has non-finite values");
  }
  std::string out = build_header(
      "mrtrix track scalars",
      {{"datatype", "Float32LE"}, {"count", std::to_string(tracks.size())}});
  for (const ScalarTrack& track : tracks) {
    for (Eigen::Index i = 0; i < track.size(); ++i)
      encode_f32_le(static_cast<float>(track[i]), out);
    encode_f32_le(std::numeric_limits<float>::quiet_NaN(), out);
  }
  encode_f32_le(std::numeric_limits<float>::infinity(), out);
  return out;
}

FiberCluster attach_scalars(FiberCluster cluster, const std::string& name,
                            std::vector<ScalarTrack> values) {
  if (values.size() != cluster.streamlines.size())
    fail(Errc::alignment,
         "channel `" + name + "`: " + std::to_string(values.size()) +
             " tracks for " + std::to_string(cluster.streamlines.size()) +
             " streamlines");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i].size() != cluster.streamlines[i].cols())
      fail(Errc::alignment, "channel `" + name + "`: track " +
                                std::to_string(i) + " has " +
                                std::to_string(values[i].size()) +
                                " values for " +
                                std::to_string(cluster.streamlines[i].cols()) +
                                " points");
  cluster.scalar_channels[name] = std::move(values);  // replaces on repeat
  return cluster;
}

// ---- subject directories --------------------------------------------------

std::string cluster_file_stem(int cluster_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cluster_%05d", cluster_id);
  return buf;
}

SubjectData load_subject(const fs::path& dir, const SubjectLayout& layout) {
  SubjectData subject;
  subject.subject_id = dir.filename().string();
  subject.clusters.resize(layout.cluster_count);

  const fs::path clusters_dir = dir / "clusters";
  const fs::path scalars_dir = dir / "scalars";

  for (int id = 1; id <= layout.cluster_count; ++id) {
    FiberCluster& cluster = subject.clusters[id - 1];
    cluster.cluster_id = id;
    const std::string stem = cluster_file_stem(id);
    const fs::path tck_path = clusters_dir / (stem + ".tck");
    const fs::path fa_path = scalars_dir / (stem + ".fa.tsf");
    const fs::path md_path = scalars_dir / (stem + ".md.tsf");

    const bool have_tck = fs::exists(tck_path);
    for (const auto& [path, channel] :
         {std::pair{fa_path, "FA"}, std::pair{md_path, "MD"}}) {
      if (!fs::exists(path)) continue;
      if (!have_tck)
        fail(Errc::io_error, "orphan scalar file " + path.string() +
                                 " without " + tck_path.string());
      if (cluster.missing())
        cluster.streamlines = parse_tck(read_file(tck_path));
      cluster = attach_scalars(std::move(cluster), channel,
                               parse_tsf(read_file(path)));
    }
    if (have_tck && cluster.missing())
      cluster.streamlines = parse_tck(read_file(tck_path));
  }
  return subject;
}

void write_subject(const fs::path& dir, const SubjectData& subject) {
  fs::create_directories(dir / "clusters");
  bool any_scalars = false;
  for (const FiberCluster& c : subject.clusters)
    if (!c.scalar_channels.empty()) any_scalars = true;
  if (any_scalars) fs::create_directories(dir / "scalars");

  for (const FiberCluster& c : subject.clusters) {
    if (c.missing()) continue;
    const std::string stem = cluster_file_stem(c.cluster_id);
    write_file(dir / "clusters" / (stem + ".tck"), write_tck(c.streamlines));
    for (const auto& [channel, tracks] : c.scalar_channels) {
      std::string suffix = channel == "FA" ? ".fa.tsf" : ".md.tsf";
      write_file(dir / "scalars" / (stem + suffix), write_tsf(tracks));
    }
  }
}

// ---- phenotype CSV --------------------------------------------------------

namespace {

constexpr const char* kPhenotypeHeader = "subject_id,sex,age,tpvt,torrt,tfat";

std::optional<double> parse_optional_double(const std::string& cell,
                                            std::size_t row) {
  if (cell.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    if (!std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    fail(Errc::parse_error,
         "row " + std::to_string(row) + ": bad numeric value `" + cell + "`");
  }
}

std::vector<std::string> csv_cells(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

std::vector<std::string_view> text_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::map<std::string, PhenotypeRecord> load_phenotypes(
    std::string_view csv, const PhenotypeLimits& limits) {
  const auto lines = text_lines(csv);
  if (lines.empty() || trim(lines[0]) != kPhenotypeHeader)
    fail(Errc::format_error,
         std::string("expected header `") + kPhenotypeHeader + "`");

  std::map<std::string, PhenotypeRecord> out;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (trim(lines[row]).empty()) continue;
    const auto cells = csv_cells(lines[row]);
    if (cells.size() != 6)
      fail(Errc::format_error, "row " + std::to_string(row) + ": expected 6 "
                                   "columns, got " +
                                   std::to_string(cells.size()));
    const std::string& id = cells[0];
    if (id.empty())
      fail(Errc::format_error, "row " + std::to_string(row) + ": empty id");
    if (out.count(id))
      fail(Errc::duplicate_id, "subject `" + id + "` appears twice");

    PhenotypeRecord rec;
    const std::string& sex = cells[1];
    if (!sex.empty()) {
      if (sex == "F" || sex == "0")
        rec.sex = 0;
      else if (sex == "M" || sex == "1")
        rec.sex = 1;
      else
        fail(Errc::parse_error,
             "row " + std::to_string(row) + ": bad sex value `" + sex + "`");
    }
    rec.age = parse_optional_double(cells[2], row);
    if (rec.age && (*rec.age < limits.age_min || *rec.age > limits.age_max))
      fail(Errc::parse_error, "row " + std::to_string(row) +
                                  ": age outside plausible range");
    rec.tpvt = parse_optional_double(cells[3], row);
    rec.torrt = parse_optional_double(cells[4], row);
    rec.tfat = parse_optional_double(cells[5], row);
    out.emplace(id, rec);
  }
  return out;
}

std::string write_phenotype_csv(
    const std::map<std::string, PhenotypeRecord>& records) {
  std::string out = std::string(kPhenotypeHeader) + "\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& [id, rec] : records) {
    out += id;
    out += ',';
    out += rec.sex ? (*rec.sex == 1 ? "M" : "F") : "";
    out += ',' + cell(rec.age) + ',' + cell(rec.tpvt) + ',' + cell(rec.torrt) +
           ',' + cell(rec.tfat) + '\n';
  }
  return out;
}

// ---- feature CSV ----------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string write_feature_csv(const FeatureMatrix& matrix) {
  if (static_cast<Eigen::Index>(matrix.subject_ids.size()) !=
      matrix.values.rows())
    fail(Errc::invalid_input, "row keys and value rows disagree");
  std::string out = "# measure=";
  out += measure_name(matrix.measure);
  out += "\nsubject_id";
  char col[16];
  for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
    std::snprintf(col, sizeof col, ",c%04d", static_cast<int>(c + 1));
    out += col;
  }
  out += '\n';
  for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
    out += matrix.subject_ids[r];
    for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
      out += ',';
      out += format_double(matrix.values(r, c));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix read_feature_csv(std::string_view bytes) {
  const auto lines = text_lines(bytes);
  if (lines.size() < 2)
    fail(Errc::format_error, "feature CSV needs a metadata and a header line");
  const std::string meta = trim(lines[0]);
  if (meta.rfind("# measure=", 0) != 0)
    fail(Errc::format_error, "missing `# measure=` metadata line");
  const auto kind = measure_from_name(meta.substr(std::strlen("# measure=")));
  if (!kind)
    fail(Errc::format_error, "unknown measure in metadata line: " + meta);

  const auto header = csv_cells(lines[1]);
  if (header.empty() || header[0] != "subject_id")
    fail(Errc::format_error, "header must start with subject_id");
  const int n_cols = static_cast<int>(header.size()) - 1;
  if (n_cols < 1) fail(Errc::format_error, "no feature columns");
  char expect[16];
  for (int c = 0; c < n_cols; ++c) {
    std::snprintf(expect, sizeof expect, "c%04d", c + 1);
    if (header[c + 1] != expect)
      fail(Errc::format_error, "unexpected column name `" + header[c + 1] +
                                   "`, expected `" + expect + "`");
  }

  FeatureMatrix m;
  m.measure = *kind;
  const std::size_t n_rows = lines.size() - 2;
  m.values.resize(static_cast<Eigen::Index>(n_rows), n_cols);
  std::set<std::string> seen;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto cells = csv_cells(lines[r + 2]);
    if (static_cast<int>(cells.size()) != n_cols + 1)
      fail(Errc::format_error,
           "row " + std::to_string(r + 2) + ": expected " +
               std::to_string(n_cols + 1) + " cells, got " +
               std::to_string(cells.size()));
    if (cells[0].empty())
      fail(Errc::format_error, "row " + std::to_string(r + 2) + ": empty id");
    if (!seen.insert(cells[0]).second)
      fail(Errc::duplicate_id, "subject `" + cells[0] + "` appears twice");
    m.subject_ids.push_back(cells[0]);
    for (int c = 0; c < n_cols; ++c) {
      try {
        std::size_t used = 0;
        m.values(static_cast<Eigen::Index>(r), c) =
            std::stod(cells[c + 1], &used);
        if (used != cells[c + 1].size())
          throw std::invalid_argument(cells[c + 1]);
      } catch (const std::exception&) {
        fail(Errc::parse_error, "row " + std::to_string(r + 2) +
                                    ": bad value `" + cells[c + 1] + "`");
      }
    }
  }
  return m;
}

// ---- files ----------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof())
    fail(Errc::io_error, "read failure on " + path.string());
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_error, "write failure on " + path.string());
}

}  // namespace tractshape
