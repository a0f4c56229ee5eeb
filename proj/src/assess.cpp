#include "l2h/assess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "l2h/errors.hpp"

namespace l2h {

ConfusionMatrix::ConfusionMatrix(ClassScheme scheme)
    : scheme_(std::move(scheme)), counts_(static_cast<std::size_t>(scheme_.size()) * scheme_.size(), 0) {}

std::uint64_t& ConfusionMatrix::at(int m, int r) {
  if (!scheme_.contains(m)) throw UnknownClassError(m);
  if (!scheme_.contains(r)) throw UnknownClassError(r);
  return counts_[static_cast<std::size_t>(m - 1) * size() + (r - 1)];
}

std::uint64_t ConfusionMatrix::at(int m, int r) const {
  if (!scheme_.contains(m)) throw UnknownClassError(m);
  if (!scheme_.contains(r)) throw UnknownClassError(r);
  return counts_[static_cast<std::size_t>(m - 1) * size() + (r - 1)];
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::row_total(int m) const {
  std::uint64_t s = 0;
  for (int r = 1; r <= size(); ++r) s += at(m, r);
  return s;
}

std::uint64_t ConfusionMatrix::col_total(int r) const {
  std::uint64_t s = 0;
  for (int m = 1; m <= size(); ++m) s += at(m, r);
  return s;
}

std::vector<int> largest_remainder(const std::vector<double>& weights, int n) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (total <= 0.0 || n <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = n * weights[i] / total;
    out[i] = static_cast<int>(std::floor(quota));
    assigned += out[i];
    rem.emplace_back(quota - out[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < n - assigned; ++k) ++out[rem[k].second];
  return out;
}

namespace {

SamplePoint make_point(const RasterGrid& map, std::size_t index) {
  SamplePoint p;
  p.col = static_cast<int>(index % map.width());
  p.row = static_cast<int>(index / map.width());
  auto [x, y] = map.georef().pixel_to_world(p.col + 0.5, p.row + 0.5);
  p.x = x;
  p.y = y;
  p.map_class = map.classes()[index];
  return p;
}

// k distinct indices from `pool`, partial Fisher-Yates.
std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<SamplePoint> sample_points(const RasterGrid& map, int n, std::uint64_t seed, SampleStrategy strategy) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  if (map.dtype() != DType::ClassU8) throw FormatError("sample_points expects a class map");
  std::mt19937_64 rng(seed);
  std::vector<SamplePoint> out;
  const auto px = map.classes();
  if (strategy == SampleStrategy::Uniform) {
    if (static_cast<std::size_t>(n) > px.size())
      throw ConfigError("cannot draw " + std::to_string(n) + " points without replacement from " +
                        std::to_string(px.size()) + " pixels");
    std::vector<std::size_t> pool(px.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (auto i : draw(std::move(pool), n, rng)) out.push_back(make_point(map, i));
    return out;
  }
  std::vector<std::vector<std::size_t>> by_class(256);
  for (std::size_t i = 0; i < px.size(); ++i)
    if (px[i] != cls::kUnlabeled && px[i] != map.nodata()) by_class[px[i]].push_back(i);
  std::vector<double> weights(256);
  for (int c = 0; c < 256; ++c) weights[c] = static_cast<double>(by_class[c].size());
  const auto alloc = largest_remainder(weights, n);
  for (int c = 0; c < 256; ++c) {
    if (alloc[c] == 0) continue;
    for (auto i : draw(by_class[c], alloc[c], rng)) out.push_back(make_point(map, i));
  }
  return out;
}

void evaluate_points(std::vector<SamplePoint>& points, const RasterGrid& map, const RasterGrid& reference) {
  if (map.width() != reference.width() || map.height() != reference.height())
    throw AlignmentError("map and reference differ in shape");
  for (auto& p : points) {
    if (p.col < 0 || p.row < 0 || p.col >= map.width() || p.row >= map.height())
      throw ShapeError("sample point outside the map extent");
    p.map_class = map.class_at(p.col, p.row);
    p.reference_class = reference.class_at(p.col, p.row);
  }
}

ConfusionMatrix confusion(const std::vector<SamplePoint>& points, const ClassScheme& scheme) {
  ConfusionMatrix cm(scheme);
  for (const auto& p : points) ++cm.at(p.map_class, p.reference_class);
  return cm;
}

ConfusionMatrix confusion_from_grids(const RasterGrid& map, const RasterGrid& reference, const ClassScheme& scheme) {
  if (map.width() != reference.width() || map.height() != reference.height())
    throw AlignmentError("map and reference differ in shape");
  ConfusionMatrix cm(scheme);
  auto m = map.classes();
  auto r = reference.classes();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (r[i] == cls::kUnlabeled || r[i] == reference.nodata()) continue;
    ++cm.at(m[i], r[i]);
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  m.total = cm.total();
  if (m.total == 0) throw EmptyMatrixError("confusion matrix is empty");
  const double n = static_cast<double>(m.total);
  double diag = 0.0, chance = 0.0;
  for (int k = 1; k <= cm.size(); ++k) {
    const double row = static_cast<double>(cm.row_total(k));
    const double col = static_cast<double>(cm.col_total(k));
    const double d = static_cast<double>(cm.at(k, k));
    diag += d;
    chance += row * col;
    m.map_accuracy.push_back(row > 0 ? std::optional<double>(d / row) : std::nullopt);
    m.reference_accuracy.push_back(col > 0 ? std::optional<double>(d / col) : std::nullopt);
  }
  const double po = diag / n;
  const double pe = chance / (n * n);
  m.overall_accuracy = po;
  // pe == 1 only when a single class occupies both marginals; agreement is
  // then perfect.
  m.kappa = pe < 1.0 ? (po - pe) / (1.0 - pe) : 1.0;
  return m;
}

std::vector<double> AreaStats::delta() const {
  std::vector<double> d(map_fraction.size(), 0.0);
  if (!ref_fraction) return d;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = map_fraction[i] - (*ref_fraction)[i];
  return d;
}

std::vector<AreaStats> area_misestimation(const RasterGrid& map, const RasterGrid& regions,
                                          const ReferenceFractions& reference, const ClassScheme& scheme) {
  if (!map.same_frame(regions)) throw AlignmentError("map and region grid differ in shape or georef");
  const int L = scheme.size();
  std::map<int, std::vector<std::uint64_t>> hist;
  auto m = map.classes();
  auto r = regions.classes();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (r[i] == 0 || r[i] == regions.nodata()) continue;
    if (m[i] == cls::kUnlabeled || m[i] == map.nodata()) continue;
    if (!scheme.contains(m[i])) throw UnknownClassError(m[i]);
    auto& h = hist[r[i]];
    if (h.empty()) h.assign(L, 0);
    ++h[m[i] - 1];
  }
  std::vector<AreaStats> out;
  for (const auto& [region, h] : hist) {
    AreaStats s;
    s.region = region;
    const double total = static_cast<double>(std::accumulate(h.begin(), h.end(), std::uint64_t{0}));
    for (int k = 0; k < L; ++k) s.map_fraction.push_back(static_cast<double>(h[k]) / total);
    if (auto it = reference.find(region); it != reference.end()) {
      std::vector<double> ref(L, 0.0);
      for (auto [c, f] : it->second) {
        if (!scheme.contains(c)) throw UnknownClassError(c);
        ref[c - 1] = f;
      }
      s.ref_fraction = std::move(ref);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- text forms

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r\"");
    auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

std::string format_confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "map\\reference";
  for (const auto& c : cm.scheme().classes()) out << ',' << c.name;
  out << '\n';
  for (int m = 1; m <= cm.size(); ++m) {
    out << cm.scheme().info(m).name;
    for (int r = 1; r <= cm.size(); ++r) out << ',' << cm.at(m, r);
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix parse_confusion_csv(const std::string& text, const ClassScheme& scheme) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 2) throw FormatError("confusion CSV: missing header row");
  std::vector<std::uint8_t> cols;
  for (std::size_t i = 1; i < header.size(); ++i) cols.push_back(scheme.id_of(header[i]));
  ConfusionMatrix cm(scheme);
  std::vector<bool> seen(scheme.size() + 1, false);
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) throw FormatError("confusion CSV: ragged row '" + line + "'");
    const auto m = scheme.id_of(cells[0]);
    if (seen[m]) throw FormatError("confusion CSV: duplicate row " + cells[0]);
    seen[m] = true;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(cells[i], &used);
        if (used != cells[i].size() || v < 0) throw std::invalid_argument(cells[i]);
        cm.at(m, cols[i - 1]) = static_cast<std::uint64_t>(v);
      } catch (const std::invalid_argument&) {
        throw FormatError("confusion CSV: bad count '" + cells[i] + "'");
      } catch (const std::out_of_range&) {
        throw FormatError("confusion CSV: count out of range '" + cells[i] + "'");
      }
    }
  }
  return cm;
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path, const ClassScheme& scheme) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_confusion_csv(ss.str(), scheme);
}

std::string metrics_json(const Metrics& m, const ClassScheme& scheme) {
  nlohmann::ordered_json j;
  j["total"] = m.total;
  j["overall_accuracy"] = m.overall_accuracy;
  j["kappa"] = m.kappa;
  auto per_class = nlohmann::ordered_json::array();
  for (int k = 1; k <= scheme.size(); ++k) {
    nlohmann::ordered_json c;
    c["class"] = scheme.info(k).name;
    const auto& pa = m.map_accuracy[k - 1];
    const auto& ua = m.reference_accuracy[k - 1];
    c["map_accuracy"] = pa ? nlohmann::ordered_json(*pa) : nlohmann::ordered_json(nullptr);
    c["reference_accuracy"] = ua ? nlohmann::ordered_json(*ua) : nlohmann::ordered_json(nullptr);
    per_class.push_back(std::move(c));
  }
  j["per_class"] = std::move(per_class);
  return j.dump(2);
}

ReferenceFractions parse_reference_csv(const std::string& text, const ClassScheme& scheme) {
  ReferenceFractions ref;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv(line);
    if (header) {
      header = false;
      if (cells.size() >= 1 && cells[0] == "region") continue;
    }
    if (cells.size() != 3) throw FormatError("reference CSV: expected region,class,fraction");
    int region = 0;
    double fraction = 0;
    try {
      region = std::stoi(cells[0]);
      fraction = std::stod(cells[2]);
    } catch (const std::exception&) {
      throw FormatError("reference CSV: bad row '" + line + "'");
    }
    int c = 0;
    try {
      c = std::stoi(cells[1]);
    } catch (const std::exception&) {
      c = scheme.id_of(cells[1]);
    }
    ref[region][c] = fraction;
  }
  return ref;
}

std::string format_misestimation_csv(const std::vector<AreaStats>& stats, const ClassScheme& scheme) {
  std::ostringstream out;
  out.precision(10);
  out << "region,class,map_fraction,ref_fraction,delta\n";
  for (const auto& s : stats) {
    const auto d = s.delta();
    for (int k = 1; k <= scheme.size(); ++k) {
      out << s.region << ',' << scheme.info(k).name << ',' << s.map_fraction[k - 1] << ',';
      if (s.ref_fraction)
        out << (*s.ref_fraction)[k - 1] << ',' << d[k - 1];
      else
        out << "NA,NA";
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace l2h
