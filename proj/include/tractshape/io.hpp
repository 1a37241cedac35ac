#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tractshape/types.hpp"

namespace tractshape {

// ---- track files ----------------------------------------------------------
//
// TCK layout: text header starting with the line `mrtrix tracks`, then
// `key: value` lines including `datatype:` (Float32LE or Float32BE) and
// `file: . <offset>` (byte offset of the payload from file start), closed by
// a line `END`. The payload is consecutive 32-bit float triplets; a NaN
// triplet ends a streamline, an Inf triplet ends the stream.
//
// TSF is identical except the magic is `mrtrix track scalars` and the payload
// holds single floats per point.

std::vector<Streamline> parse_tck(std::string_view bytes);
std::string write_tck(const std::vector<Streamline>& streamlines);

std::vector<ScalarTrack> parse_tsf(std::string_view bytes);
std::string write_tsf(const std::vector<ScalarTrack>& tracks);

// Adds (or replaces) a named per-point channel; outer size must equal the
// streamline count and each inner size that streamline's point count.
FiberCluster attach_scalars(FiberCluster cluster, const std::string& name,
                            std::vector<ScalarTrack> values);

// ---- subject directories --------------------------------------------------
//
// <dir>/clusters/cluster_00001.tck ... cluster_NNNNN.tck   (absent = missing)
// <dir>/scalars/cluster_00001.fa.tsf, cluster_00001.md.tsf (optional)

struct SubjectLayout {
  int cluster_count = kAtlasClusterCount;
};

std::string cluster_file_stem(int cluster_id);  // "cluster_00042"

SubjectData load_subject(const std::filesystem::path& dir,
                         const SubjectLayout& layout = {});

void write_subject(const std::filesystem::path& dir, const SubjectData& subject);

// ---- phenotype CSV --------------------------------------------------------
//
// Header exactly `subject_id,sex,age,tpvt,torrt,tfat`; sex is F/M or 0/1;
// empty cells are missing values.

struct PhenotypeLimits {
  double age_min = 0;
  double age_max = 120;
};

std::map<std::string, PhenotypeRecord> load_phenotypes(
    std::string_view csv, const PhenotypeLimits& limits = {});

std::string write_phenotype_csv(
    const std::map<std::string, PhenotypeRecord>& records);

// ---- feature CSV ----------------------------------------------------------
//
// `# measure=<name>` metadata line, then `subject_id,c0001,...,cNNNN` and one
// row per subject with values printed at 17 significant digits.

std::string write_feature_csv(const FeatureMatrix& matrix);
FeatureMatrix read_feature_csv(std::string_view bytes);

// ---- files ----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::string format_double(double v);  // 17 significant digits, round-trip safe

}  // namespace tractshape
