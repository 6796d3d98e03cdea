#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "vpsim/illness_script.hpp"
#include "vpsim/timestamp.hpp"

namespace vpsim::test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(VPSIM_SOURCE_DIR); }
inline fs::path data_path(const std::string& rel) { return source_dir() / "data" / rel; }
inline fs::path golden_path(const std::string& rel) { return source_dir() / "tests" / "golden" / rel; }

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "vpsim-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Copies the shipped study material (not records) into `dir`.
inline void copy_storage(const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* name : {"category_manifest.json", "adjective_map.json", "emotions.json"})
    fs::copy_file(data_path(name), dir / name, fs::copy_options::overwrite_existing);
  for (const char* sub : {"scripts", "questionnaires", "fixtures"})
    fs::copy(data_path(sub), dir / sub, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

class ManualClock {
 public:
  explicit ManualClock(std::int64_t start_ms = 1714564800000)  // 2024-05-01T12:00:00Z
      : now_(std::make_shared<std::atomic<std::int64_t>>(start_ms)) {}
  Clock clock() const {
    auto now = now_;
    return [now] { return from_epoch_ms(now->load()); };
  }
  void advance_ms(std::int64_t ms) { *now_ += ms; }
  void advance_s(std::int64_t s) { advance_ms(s * 1000); }
  Timestamp now() const { return from_epoch_ms(now_->load()); }

 private:
  std::shared_ptr<std::atomic<std::int64_t>> now_;
};

inline std::shared_ptr<const CategoryManifest> manifest() {
  static auto m = std::make_shared<const CategoryManifest>(
      load_manifest_file(data_path("category_manifest.json").string()));
  return m;
}

inline IllnessScript script(const std::string& name) {
  return load_script_file(data_path("scripts/" + name + ".json").string(), manifest());
}

}  // namespace vpsim::test
