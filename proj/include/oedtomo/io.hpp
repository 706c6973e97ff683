#pragma once

// File formats: TOMOSET v1 training sets, CSV tables, 8-bit PGM (P2) image
// dumps with a min/max sidecar, and flat key=value run configuration files.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "datagen.hpp"

namespace oedtomo {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- TOMOSET v1 ---------------------------------------------------------
// Line 1: "TOMOSET 1 <count> <height> <width>".  Then, per image, height
// lines of width space-separated values printed with %.17g (lossless for
// doubles).

inline void write_tomoset(const std::string& path, const TrainingSet& ts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_tomoset: cannot open " + path);
  out << "TOMOSET 1 " << ts.count() << " " << ts.grid.height << " " << ts.grid.width << "\n";
  for (const auto& img : ts.images) {
    for (int i = 0; i < ts.grid.height; ++i) {
      for (int j = 0; j < ts.grid.width; ++j) {
        if (j) out << " ";
        out << fmt_g17(img.at(i, j));
      }
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write_tomoset: write failed for " + path);
}

inline TrainingSet read_tomoset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_tomoset: cannot open " + path);
  std::string tag;
  int version = 0, count = 0, height = 0, width = 0;
  in >> tag >> version >> count >> height >> width;
  if (!in || tag != "TOMOSET")
    throw std::runtime_error("read_tomoset: " + path + " is not a TOMOSET file");
  if (version != 1)
    throw std::runtime_error("read_tomoset: unsupported version " + std::to_string(version));
  if (count < 1 || height < 2 || width < 2)
    throw std::runtime_error("read_tomoset: malformed header in " + path);
  TrainingSet ts;
  ts.grid = Grid(height, width);
  ts.kind = "file";
  for (int s = 0; s < count; ++s) {
    Image img = Image::zero(ts.grid);
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        // Tokens are parsed via stod so non-finite spellings ("nan", "inf")
        // are recognized and rejected instead of failing stream extraction.
        std::string tok;
        if (!(in >> tok))
          throw std::runtime_error("read_tomoset: truncated data in " + path +
                                   " (image " + std::to_string(s) + ")");
        double v;
        try {
          size_t pos = 0;
          v = std::stod(tok, &pos);
          if (pos != tok.size()) throw std::invalid_argument("trailing");
        } catch (const std::out_of_range&) {
          throw std::runtime_error("read_tomoset: non-finite value '" + tok + "' in " + path);
        } catch (...) {
          throw std::runtime_error("read_tomoset: malformed value '" + tok + "' in " + path);
        }
        if (!std::isfinite(v))
          throw std::runtime_error("read_tomoset: non-finite value '" + tok + "' in " + path);
        img.at(i, j) = v;
      }
    ts.images.push_back(std::move(img));
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("read_tomoset: trailing data in " + path);
  return ts;
}

// --- CSV -----------------------------------------------------------------

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ",";
    out << header[i];
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

// --- PGM (P2) ------------------------------------------------------------
// Plain-text 8-bit grayscale, linearly rescaled from [min, max]; the sidecar
// "<path>.meta" records the original range so values can be recovered.

inline void write_pgm(const std::string& path, const Image& img) {
  double lo = img.values.minCoeff();
  double hi = img.values.maxCoeff();
  double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P2\n" << img.grid.width << " " << img.grid.height << "\n255\n";
  for (int i = 0; i < img.grid.height; ++i) {
    for (int j = 0; j < img.grid.width; ++j) {
      int v = static_cast<int>(std::lround((img.at(i, j) - lo) / span * 255.0));
      v = std::clamp(v, 0, 255);
      if (j) out << " ";
      out << v;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("write_pgm: cannot open " + path + ".meta");
  meta << "min = " << fmt_g17(lo) << "\n" << "max = " << fmt_g17(hi) << "\n";
}

// --- Run configuration ---------------------------------------------------
// Flat "key = value" lines; '#' starts a comment; blank lines ignored.
// Unknown keys are rejected with the offending name.

class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
  }

  static RunConfig parse_text(const std::string& text, const std::string& origin = "<text>") {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto strip = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string stripped = strip(line);
      if (stripped.empty()) continue;
      auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: " + origin + ":" + std::to_string(lineno) +
                                    ": expected key=value, got '" + stripped + "'");
      std::string key = strip(stripped.substr(0, eq));
      std::string val = strip(stripped.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("config: " + origin + ":" + std::to_string(lineno) +
                                    ": empty key");
      cfg.values_[key] = val;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }
  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (...) {
      throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" +
                                  it->second + "'");
    }
  }
  int get_int(const std::string& key, int dflt) const {
    double v = get_double(key, dflt);
    int iv = static_cast<int>(v);
    if (iv != v)
      throw std::invalid_argument("config: key '" + key + "' must be an integer");
    return iv;
  }

  // Rejects any key not in the allowed set, naming the first offender.
  void restrict_keys(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k))
        throw std::invalid_argument("config: unknown key '" + k + "'");
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace oedtomo
