#include "devmetrics/unify/unifier.hpp"

#include <spdlog/spdlog.h>

namespace devmetrics::unify {

UnifyCheckpoint run_unify(const MappingSpec& m, RecordSource& source, Sink& sink, UnifyOptions options) {
  check_mapping(m);
  if (options.batch_limit == 0 || options.batch_limit > kMaxScanLimit) {
    throw std::invalid_argument("batch limit must be in 1..10000");
  }
  sink.create_table(m);
  auto checkpoint = sink.load_checkpoint(m.table).value_or(UnifyCheckpoint{m.table, "", 0, 0, 0});

  ScanFilter filter;
  filter.event_type = m.source_event_type;
  for (std::size_t batch = 0; options.max_batches == 0 || batch < options.max_batches; ++batch) {
    const auto page = source.pull(Cursor::decode(checkpoint.cursor), options.batch_limit, filter);
    if (page.records.empty()) break;

    std::vector<Row> rows;
    std::vector<QuarantineEntry> quarantine;
    auto next = checkpoint;
    for (const auto& record : page.records) {
      auto outcome = project(record, m);
      if (auto* row = std::get_if<Row>(&outcome)) {
        rows.push_back(std::move(*row));
        ++next.rows_emitted;
      } else if (auto* q = std::get_if<Quarantine>(&outcome)) {
        const auto id = record.record_id();
        quarantine.push_back({id.install_guid, id.event_id, q->path, q->reason, record.document});
        ++next.quarantined;
      } else {
        ++next.skipped;
      }
    }
    next.cursor = page.next.encode();
    sink.commit(m.table, rows, quarantine, next);
    checkpoint = std::move(next);
    spdlog::debug("unify {}: {} rows, {} quarantined", m.table, rows.size(), quarantine.size());
  }
  return checkpoint;
}

}  // namespace devmetrics::unify
