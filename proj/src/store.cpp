#include "devmetrics/store.hpp"

#include "devmetrics/uuid.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace devmetrics {

namespace fs = std::filesystem;

struct Store::Partition {
  PartitionKey key;
  fs::path path;
  int fd = -1;
  std::mutex write_mu;  // single logical writer
  mutable std::shared_mutex entries_mu;
  std::vector<Entry> entries;  // index == seq
  std::uint64_t end_offset = 0;
  std::uint64_t bytes = 0;
  Instant min_ts = Instant::max();
  Instant max_ts = Instant::min();

  ~Partition() {
    if (fd >= 0) ::close(fd);
  }
};

namespace {

using Code = StoreError::Code;

std::uint32_t crc_of(std::string_view body) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

template <typename T>
bool parse_number(std::string_view s, T& out, int base = 10) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string encode_line(std::uint64_t gen, std::uint64_t seq, Instant received_at, std::string_view doc) {
  std::string body = std::to_string(gen) + ' ' + std::to_string(seq) + ' ' +
                     std::to_string(received_at.time_since_epoch().count()) + ' ';
  body.append(doc);
  char crc[16];
  std::snprintf(crc, sizeof crc, "%08x ", crc_of(body));
  std::string line = crc;
  line += body;
  line.push_back('\n');
  return line;
}

struct DecodedLine {
  std::uint64_t gen = 0;
  std::uint64_t seq = 0;
  Instant received_at{};
  std::string_view doc;
};

// `line` excludes the trailing newline.
std::optional<DecodedLine> decode_line(std::string_view line) {
  std::string_view fields[4];
  std::string_view rest = line;
  for (auto& f : fields) {
    const auto sp = rest.find(' ');
    if (sp == std::string_view::npos) return std::nullopt;
    f = rest.substr(0, sp);
    rest.remove_prefix(sp + 1);
  }
  std::uint32_t crc = 0;
  if (fields[0].size() != 8 || !parse_number(fields[0], crc, 16)) return std::nullopt;
  if (crc_of(line.substr(9)) != crc) return std::nullopt;
  DecodedLine d;
  long long ms = 0;
  if (!parse_number(fields[1], d.gen) || !parse_number(fields[2], d.seq) || !parse_number(fields[3], ms)) {
    return std::nullopt;
  }
  d.received_at = Instant{std::chrono::milliseconds{ms}};
  d.doc = rest;
  return d;
}

std::optional<MetricEnvelope> envelope_from_document(std::string_view doc) {
  try {
    auto v = validate_envelope(Json::parse(doc));
    if (!v) return std::nullopt;
    return std::move(v).envelope();
  } catch (const Json::exception&) {
    return std::nullopt;
  }
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      throw StoreError(err == ENOSPC || err == EDQUOT ? Code::StorageFull : Code::Io,
                       std::string("write failed: ") + std::strerror(err));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string to_hex(std::string_view s) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 0xF]);
  }
  return out;
}

std::optional<std::string> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) return std::nullopt;
  std::string out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    unsigned v = 0;
    if (!parse_number(s.substr(i, 2), v, 16)) return std::nullopt;
    out.push_back(static_cast<char>(v));
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto p = s.find(sep);
    parts.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return parts;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cursor / filter / wire form

std::string Cursor::encode() const {
  if (lo_ == 0 && hi_ == 0 && !after_partition_) return {};
  std::string text = "1|" + std::to_string(lo_) + "|" + std::to_string(hi_);
  if (after_partition_) {
    text += "|" + format_day(after_partition_->day) + "|" + after_partition_->install_guid + "|" +
            std::to_string(after_seq_);
  }
  return to_hex(text);
}

Cursor Cursor::decode(std::string_view token) {
  Cursor c;
  if (token.empty()) return c;
  const auto bad = [&] { return StoreError(Code::BadCursor, "malformed cursor"); };
  const auto text = from_hex(token);
  if (!text) throw bad();
  const auto parts = split(*text, '|');
  if ((parts.size() != 3 && parts.size() != 6) || parts[0] != "1") throw bad();
  if (!parse_number(parts[1], c.lo_) || !parse_number(parts[2], c.hi_) || c.lo_ > c.hi_) throw bad();
  if (parts.size() == 6) {
    const auto day = parse_day(parts[3]);
    if (!day || !is_uuid(parts[4]) || !parse_number(parts[5], c.after_seq_)) throw bad();
    c.after_partition_ = PartitionKey{*day, std::string(parts[4])};
  }
  return c;
}

bool ScanFilter::matches(const MetricEnvelope& e) const {
  if (install_guid && e.agent.install_guid != *install_guid) return false;
  if (event_type && e.event_type() != *event_type) return false;
  if (from && e.timestamp < *from) return false;
  if (to && e.timestamp >= *to) return false;
  return true;
}

Json to_json(const StoredRecord& r) {
  return Json{{"envelope", to_json(r.envelope)},
              {"received_at", format_instant(r.received_at)},
              {"partition", {{"day", format_day(r.partition.day)}, {"install_guid", r.partition.install_guid}}},
              {"seq", r.seq}};
}

// ---------------------------------------------------------------------------
// Store

Store::Store(StoreOptions options) : options_(std::move(options)), shards_(new IndexShard[kShards]) {
  std::error_code ec;
  fs::create_directories(options_.directory / "partitions", ec);
  if (ec) throw StoreError(Code::Io, "cannot create data directory: " + ec.message());
  recover();
}

Store::~Store() = default;

Store::IndexShard& Store::shard_for(const RecordId& id) {
  const std::size_t h = std::hash<std::string>{}(id.install_guid) * 31 + std::hash<std::string>{}(id.event_id);
  return shards_[h % kShards];
}

std::uint64_t Store::begin_generation() {
  std::lock_guard lock(gen_mu_);
  const auto g = next_gen_++;
  inflight_.insert(g);
  return g;
}

void Store::end_generation(std::uint64_t gen, bool failed) {
  std::lock_guard lock(gen_mu_);
  inflight_.erase(gen);
  if (failed) {
    // The failed number may already be covered by an issued cursor window, so
    // it must never be handed out again after a restart.
    std::ofstream floor(options_.directory / "generation.floor", std::ios::trunc);
    floor << next_gen_ << '\n';
  }
}

std::uint64_t Store::visible_watermark() const {
  std::lock_guard lock(gen_mu_);
  return inflight_.empty() ? next_gen_ : *inflight_.begin();
}

Store::Partition& Store::partition_for(const PartitionKey& key) {
  {
    std::shared_lock lock(partitions_mu_);
    if (auto it = partitions_.find(key); it != partitions_.end()) return *it->second;
  }
  std::unique_lock lock(partitions_mu_);
  if (auto it = partitions_.find(key); it != partitions_.end()) return *it->second;

  auto p = std::make_unique<Partition>();
  p->key = key;
  const fs::path dir = options_.directory / "partitions" / format_day(key.day);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StoreError(Code::Io, "cannot create partition directory: " + ec.message());
  p->path = dir / (key.install_guid + ".log");
  // TODO: cap open descriptors with an LRU once deployments exceed the fd limit
  // (one descriptor per (day, install) partition stays open today).
  p->fd = ::open(p->path.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (p->fd < 0) throw StoreError(Code::Io, "cannot open " + p->path.string() + ": " + std::strerror(errno));
  auto& ref = *p;
  partitions_.emplace(key, std::move(p));
  return ref;
}

std::vector<Store::Partition*> Store::partitions_snapshot() const {
  std::shared_lock lock(partitions_mu_);
  std::vector<Partition*> out;
  out.reserve(partitions_.size());
  for (const auto& [_, p] : partitions_) out.push_back(p.get());
  return out;
}

std::size_t Store::partition_count() const {
  std::size_t n = 0;
  for (const Partition* p : partitions_snapshot()) {
    std::shared_lock lock(p->entries_mu);
    if (!p->entries.empty()) ++n;
  }
  return n;
}

void Store::recover() {
  std::uint64_t floor = 0;
  if (std::ifstream in(options_.directory / "generation.floor"); in) in >> floor;

  for (const auto& day_dir : fs::directory_iterator(options_.directory / "partitions")) {
    if (!day_dir.is_directory()) continue;
    const auto day = parse_day(day_dir.path().filename().string());
    if (!day) continue;
    for (const auto& file : fs::directory_iterator(day_dir.path())) {
      if (file.path().extension() != ".log" || !is_uuid(file.path().stem().string())) continue;
      recover_partition(partition_for(PartitionKey{*day, file.path().stem().string()}));
    }
  }

  std::uint64_t max_gen_plus_one = 0;
  for (auto* p : partitions_snapshot()) {
    if (!p->entries.empty()) max_gen_plus_one = std::max(max_gen_plus_one, p->entries.back().generation + 1);
  }
  next_gen_ = std::max(max_gen_plus_one, floor);
}

void Store::recover_partition(Partition& p) {
  std::ifstream in(p.path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto corrupt = [&](const std::string& why) {
    return StoreError(Code::CorruptPartition, "corrupt partition " + p.key.to_string() + ": " + why);
  };

  std::uint64_t offset = 0;
  while (offset < content.size()) {
    const auto nl = content.find('\n', offset);
    if (nl == std::string::npos) {
      // Torn tail from a crash mid-append: the record was never acknowledged.
      if (::ftruncate(p.fd, static_cast<off_t>(offset)) != 0) throw StoreError(Code::Io, "truncate failed");
      break;
    }
    const std::string_view line(content.data() + offset, nl - offset);
    const auto decoded = decode_line(line);
    if (!decoded) throw corrupt("bad record at offset " + std::to_string(offset));
    if (decoded->seq != p.entries.size()) throw corrupt("sequence gap at offset " + std::to_string(offset));
    if (!p.entries.empty() && decoded->gen <= p.entries.back().generation) throw corrupt("generation order");
    auto env = envelope_from_document(decoded->doc);
    if (!env || day_of(env->timestamp) != p.key.day || env->agent.install_guid != p.key.install_guid) {
      throw corrupt("record does not belong to partition");
    }
    RecordId id{env->agent.install_guid, env->event_id()};
    auto& shard = shard_for(id);
    if (!shard.ids.emplace(id, std::pair{p.key, decoded->seq}).second) throw corrupt("duplicate record id");

    const auto len = static_cast<std::uint32_t>(line.size() + 1);
    p.entries.push_back(Entry{decoded->gen, offset, len, env->timestamp, env->event_type()});
    p.bytes += len;
    p.min_ts = std::min(p.min_ts, env->timestamp);
    p.max_ts = std::max(p.max_ts, env->timestamp);
    offset = nl + 1;
  }
  p.end_offset = offset;
  total_bytes_ += p.bytes;
}

StoredRecord Store::read_entry(const Partition& p, const Entry& e, std::uint64_t seq) const {
  std::string buf(e.length, '\0');
  std::size_t done = 0;
  while (done < buf.size()) {
    const ssize_t n = ::pread(p.fd, buf.data() + done, buf.size() - done, static_cast<off_t>(e.offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw StoreError(Code::Io, "read failed in " + p.key.to_string());
    done += static_cast<std::size_t>(n);
  }
  const auto decoded = decode_line(std::string_view(buf).substr(0, buf.size() - 1));
  auto env = decoded ? envelope_from_document(decoded->doc) : std::nullopt;
  if (!env) throw StoreError(Code::CorruptPartition, "corrupt record in " + p.key.to_string());
  return StoredRecord{std::move(*env), decoded->received_at, p.key, seq, decoded->gen, std::string(decoded->doc)};
}

StoredRecord Store::read_record(const Partition& p, std::uint64_t seq) const {
  Entry e;
  {
    std::shared_lock lock(p.entries_mu);
    e = p.entries.at(seq);
  }
  return read_entry(p, e, seq);
}

AppendResult Store::append(const MetricEnvelope& envelope, Instant received_at) {
  const RecordId id{envelope.agent.install_guid, envelope.event_id()};
  auto& shard = shard_for(id);
  std::lock_guard shard_lock(shard.mu);

  if (auto it = shard.ids.find(id); it != shard.ids.end()) {
    Partition* p = nullptr;
    {
      std::shared_lock lock(partitions_mu_);
      p = partitions_.at(it->second.first).get();
    }
    return {read_record(*p, it->second.second), AppendStatus::duplicate};
  }

  const PartitionKey key{day_of(envelope.timestamp), envelope.agent.install_guid};
  auto& p = partition_for(key);
  std::string doc = canonical_bytes(envelope);

  std::lock_guard write_lock(p.write_mu);
  const std::uint64_t seq = p.entries.size();
  // Length of the line does not depend on the generation digits enough to
  // matter for the cap; check with a provisional encoding.
  if (options_.max_bytes != 0 && total_bytes_.load() + doc.size() + 64 > options_.max_bytes) {
    throw StoreError(Code::StorageFull, "store reached its configured byte cap");
  }
  const std::uint64_t gen = begin_generation();
  const std::string line = encode_line(gen, seq, received_at, doc);
  try {
    write_all(p.fd, line);
    if (options_.sync_writes && ::fdatasync(p.fd) != 0) throw StoreError(Code::Io, "fdatasync failed");
  } catch (...) {
    if (::ftruncate(p.fd, static_cast<off_t>(p.end_offset)) != 0) {
      // best effort; recovery drops a torn tail anyway
    }
    end_generation(gen, true);
    throw;
  }
  {
    std::unique_lock lock(p.entries_mu);
    p.entries.push_back(Entry{gen, p.end_offset, static_cast<std::uint32_t>(line.size()), envelope.timestamp,
                              envelope.event_type()});
    p.end_offset += line.size();
    p.bytes += line.size();
    p.min_ts = std::min(p.min_ts, envelope.timestamp);
    p.max_ts = std::max(p.max_ts, envelope.timestamp);
  }
  end_generation(gen, false);
  total_bytes_ += line.size();
  shard.ids.emplace(id, std::pair{key, seq});
  return {StoredRecord{envelope, received_at, key, seq, gen, std::move(doc)}, AppendStatus::fresh};
}

std::optional<std::pair<PartitionKey, std::uint64_t>> Store::walk(
    std::uint64_t lo, std::uint64_t hi, const std::optional<std::pair<PartitionKey, std::uint64_t>>& after,
    const ScanFilter& filter, const std::function<bool(StoredRecord&&)>& emit) const {
  if (lo >= hi) return std::nullopt;
  const std::optional<Day> from_day = filter.from ? std::optional{day_of(*filter.from)} : std::nullopt;

  for (const Partition* p : partitions_snapshot()) {
    if (after && p->key < after->first) continue;
    if (filter.install_guid && p->key.install_guid != *filter.install_guid) continue;
    if (from_day && p->key.day < *from_day) continue;
    if (filter.to && Instant{p->key.day} >= *filter.to) continue;

    const std::uint64_t first = (after && p->key == after->first) ? after->second + 1 : 0;
    std::vector<std::pair<std::uint64_t, Entry>> picked;
    {
      std::shared_lock lock(p->entries_mu);
      if (first >= p->entries.size()) continue;
      auto it = std::lower_bound(p->entries.begin() + static_cast<std::ptrdiff_t>(first), p->entries.end(), lo,
                                 [](const Entry& e, std::uint64_t g) { return e.generation < g; });
      for (; it != p->entries.end() && it->generation < hi; ++it) {
        if (filter.event_type && it->event_type != *filter.event_type) continue;
        if (filter.from && it->timestamp < *filter.from) continue;
        if (filter.to && it->timestamp >= *filter.to) continue;
        picked.emplace_back(static_cast<std::uint64_t>(it - p->entries.begin()), *it);
      }
    }
    for (auto& [seq, entry] : picked) {
      if (!emit(read_entry(*p, entry, seq))) return std::pair{p->key, seq};
    }
  }
  return std::nullopt;
}

ScanPage Store::scan(const Cursor& from, std::size_t limit, const ScanFilter& filter) const {
  if (limit == 0 || limit > kMaxScanLimit) throw std::invalid_argument("scan limit must be in 1..10000");
  const std::uint64_t watermark = visible_watermark();
  if (from.hi_ > watermark) throw StoreError(Code::BadCursor, "cursor was not issued by this store");

  ScanPage page;
  Cursor c = from;
  while (true) {
    std::optional<std::pair<PartitionKey, std::uint64_t>> after;
    if (c.after_partition_) after = std::pair{*c.after_partition_, c.after_seq_};
    const auto stop = walk(c.lo_, c.hi_, after, filter, [&](StoredRecord&& r) {
      page.records.push_back(std::move(r));
      return page.records.size() < limit;
    });
    if (stop) {
      c.after_partition_ = stop->first;
      c.after_seq_ = stop->second;
      break;
    }
    c.after_partition_.reset();
    c.after_seq_ = 0;
    c.lo_ = c.hi_;
    if (watermark <= c.hi_) break;
    c.hi_ = watermark;
  }
  page.next = c;
  return page;
}

void Store::for_each(const ScanFilter& filter, const std::function<void(const StoredRecord&)>& visit) const {
  walk(0, visible_watermark(), std::nullopt, filter, [&](StoredRecord&& r) {
    visit(r);
    return true;
  });
}

std::vector<PartitionStats> Store::stats() const {
  std::vector<PartitionStats> out;
  for (const Partition* p : partitions_snapshot()) {
    std::shared_lock lock(p->entries_mu);
    if (p->entries.empty()) continue;
    out.push_back(PartitionStats{p->key, p->entries.size(), p->bytes, p->min_ts, p->max_ts});
  }
  return out;
}

}  // namespace devmetrics
