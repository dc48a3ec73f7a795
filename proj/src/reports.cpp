#include "manifold_id/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace manifold_id {

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

void require_coords(const LocalIdMap& map) {
  if (!map.coords) throw ConfigError("local ID map has no coordinates; export needs lon/lat per row");
  if (static_cast<Index>(map.coords->size()) != map.size()) throw ConfigError("coordinate count does not match map");
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string local_map_to_csv(const LocalIdMap& map) {
  require_coords(map);
  std::string out = "lon,lat,id\n";
  for (Index i = 0; i < map.size(); ++i) {
    const GeoPoint& p = (*map.coords)[i];
    out += format_number(p.lon);
    out += ',';
    out += format_number(p.lat);
    out += ',';
    if (map.defined[i]) out += format_number(map.values(i));
    out += '\n';
  }
  return out;
}

std::string local_map_to_geojson(const LocalIdMap& map) {
  require_coords(map);
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  const std::string name(estimator_name(map.estimator));
  for (Index i = 0; i < map.size(); ++i) {
    const GeoPoint& p = (*map.coords)[i];
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {p.lon, p.lat}}};
    nlohmann::ordered_json props;
    if (map.defined[i]) {
      props["id"] = map.values(i);
    } else {
      props["id"] = nullptr;
    }
    props["estimator"] = name;
    props["k"] = map.k;
    f["properties"] = std::move(props);
    features.push_back(std::move(f));
  }
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

std::string reports_to_csv(const std::vector<IdReport>& reports) {
  std::string out = "label,estimator,k,n,scheme,seed,global,subsample_mean,subsample_std,subsamples,degenerate,note\n";
  for (const IdReport& r : reports) {
    out += csv_field(r.label) + ',' + std::string(estimator_name(r.estimator)) + ',' + std::to_string(r.k) + ',' +
           std::to_string(r.n) + ',' + csv_field(r.scheme) + ',' + std::to_string(r.seed) + ',' + format_number(r.global_value) +
           ',' + format_number(r.subsample_mean) + ',' + format_number(r.subsample_std) + ',' +
           std::to_string(r.subsamples) + ',' + std::to_string(r.degenerate) + ',' + csv_field(r.note) + '\n';
  }
  return out;
}

std::string reports_to_table(const std::vector<IdReport>& reports) {
  const bool labels = std::any_of(reports.begin(), reports.end(), [](const IdReport& r) { return !r.label.empty(); });
  const bool subs = std::any_of(reports.begin(), reports.end(), [](const IdReport& r) { return r.subsamples > 0; });
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  if (labels) header.push_back("label");
  for (const char* h : {"estimator", "k", "n", "global"}) header.push_back(h);
  if (subs) header.push_back("subsample mean +- std");
  header.push_back("note");
  rows.push_back(header);
  for (const IdReport& r : reports) {
    std::vector<std::string> row;
    if (labels) row.push_back(r.label);
    row.push_back(std::string(estimator_name(r.estimator)));
    row.push_back(r.k > 0 ? std::to_string(r.k) : "-");
    row.push_back(std::to_string(r.n));
    row.push_back(fixed(r.global_value, 3));
    if (subs) {
      row.push_back(r.subsamples > 0 ? fixed(r.subsample_mean, 3) + " +- " + fixed(r.subsample_std, 3) : "-");
    }
    std::string note = r.note;
    if (r.degenerate > 0) note += (note.empty() ? "" : "; ") + std::to_string(r.degenerate) + " degenerate";
    row.push_back(note);
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) line += "  ";
      line += rows[r][c];
      if (c + 1 < rows[r].size()) line.append(width[c] - rows[r][c].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c > 0 ? 2 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

std::string profile_to_csv(const SeparabilityProfile& profile) {
  std::string out = "alpha,p_bar,n_hat\n";
  for (std::size_t a = 0; a < profile.alphas.size(); ++a) {
    out += format_number(profile.alphas[a]) + ',' + format_number(profile.p_bar[a]) + ',' +
           format_number(profile.n_hat[a]) + '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace manifold_id
