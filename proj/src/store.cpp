#include "beboin/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "beboin/document.hpp"
#include "beboin/engine.hpp"

namespace beboin {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Appends and fsyncs, so an accepted mutation survives a process crash.
void append_durable(const fs::path& path, const std::string& text) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
  const char* data = text.data();
  std::size_t left = text.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw StoreError("write to " + path.string() + " failed: " + why);
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

// Write-then-rename keeps the previous file intact if we die halfway.
void replace_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw StoreError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct LogLine {
  std::int64_t version = 0;
  std::vector<TrialEvent> events;
};

std::vector<LogLine> read_log(const fs::path& path) {
  std::vector<LogLine> lines;
  if (!fs::exists(path)) return lines;
  std::string text = read_file(path);
  const auto last_newline = text.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < text.size()) {
    // Torn write from a crash: drop it so the next append starts on a clean line.
    fs::resize_file(path, complete);
    text.resize(complete);
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json doc = parse_json(line);
    LogLine entry;
    entry.version = doc.at("version").get<std::int64_t>();
    for (const auto& e : doc.at("events")) entry.events.push_back(event_from_json(e));
    lines.push_back(std::move(entry));
  }
  return lines;
}

}  // namespace

TrialStore::TrialStore(fs::path root, int snapshot_every)
    : root_(std::move(root)), snapshot_every_(std::max(1, snapshot_every)) {
  fs::create_directories(root_);
}

fs::path TrialStore::dir(const std::string& id) const { return root_ / id; }

StoredTrial TrialStore::create(const std::string& id, const DesignConfig& config) {
  const fs::path d = dir(id);
  if (fs::exists(d)) throw StoreError("trial '" + id + "' already exists");
  StoredTrial trial{id, 1, new_trial(config)};
  const fs::path tmp = root_ / ("." + id + ".creating");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  replace_file(tmp / "config.json", to_json(config).dump(2) + "\n");
  fs::rename(tmp, d);
  return trial;
}

void TrialStore::append(const std::string& id, std::int64_t version,
                        const std::vector<TrialEvent>& events, const TrialState& state_after) {
  Json line;
  line["version"] = version;
  Json arr = Json::array();
  for (const auto& e : events) arr.push_back(to_json(e));
  line["events"] = arr;
  append_durable(dir(id) / "events.ndjson", line.dump() + "\n");
  if (version % snapshot_every_ == 0) write_snapshot(id, version, state_after);
}

void TrialStore::write_snapshot(const std::string& id, std::int64_t version,
                                const TrialState& state) const {
  Json doc;
  doc["version"] = version;
  doc["state"] = state_to_json(state);
  replace_file(dir(id) / "snapshot.json", doc.dump() + "\n");
}

StoredTrial TrialStore::load(const std::string& id) const {
  const fs::path d = dir(id);
  if (!fs::is_directory(d)) throw StoreError("trial '" + id + "' not found");
  const DesignConfig config = config_from_json(parse_json(read_file(d / "config.json")));

  StoredTrial trial{id, 1, new_trial(config)};
  if (fs::exists(d / "snapshot.json")) {
    const Json snap = parse_json(read_file(d / "snapshot.json"));
    trial.version = snap.at("version").get<std::int64_t>();
    trial.state = state_from_json(snap.at("state"));
    if (trial.state.config != require_valid(config))
      throw StoreError("trial '" + id + "': snapshot config differs from config.json");
  }

  const std::size_t snapshot_events = trial.state.events.size();
  std::size_t seen_events = 0;
  std::int64_t expected = 2;
  for (const auto& line : read_log(d / "events.ndjson")) {
    if (line.version != expected)
      throw StoreError("trial '" + id + "': log version " + std::to_string(line.version) +
                       " where " + std::to_string(expected) + " was expected");
    ++expected;
    if (line.version <= trial.version) {
      seen_events += line.events.size();
      continue;
    }
    for (const auto& e : line.events) trial.state = advance(std::move(trial.state), e);
    trial.version = line.version;
  }
  if (seen_events != snapshot_events)
    throw StoreError("trial '" + id + "': snapshot does not match the event log");
  return trial;
}

std::vector<StoredTrial> TrialStore::load_all() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.') ids.push_back(name);
  }
  std::sort(ids.begin(), ids.end());
  std::vector<StoredTrial> out;
  for (const auto& id : ids) out.push_back(load(id));
  return out;
}

}  // namespace beboin
