#include "cbid/query.hpp"

#include <algorithm>

namespace cbid {

std::uint32_t min_reliable_excerpt_len(const PartitionConfig& cfg) {
  return 2 * cfg.window_w + cfg.overlap_o;
}

std::vector<Block> excerpt_blocks(ByteView excerpt, const PartitionConfig& cfg) {
  std::vector<Block> out;
  const std::uint32_t margin = cfg.window_w + cfg.qgram_q;
  if (excerpt.size() < 2 * std::size_t(margin)) return out;
  const std::uint32_t keep_end = static_cast<std::uint32_t>(excerpt.size()) - margin;

  const PartitionResult part = partition_payload(excerpt, cfg);
  for (const Block& b : part.blocks) {
    if (b.start_offset < margin) continue;
    if (b.end_offset() > keep_end) continue;
    out.push_back(b);
  }
  return out;
}

SegmentAppearance appearance_check(ByteView excerpt, const ArchiveSegment& seg) {
  SegmentAppearance res;
  const std::vector<Block> blocks = excerpt_blocks(excerpt, seg.cfg.partition);

  std::vector<std::uint32_t> sections;
  for (const Block& b : blocks) {
    if (!b.kept) continue;  // below the downsampling threshold: assumed positive
    ++res.blocks_queried;
    const auto section = seg.msbf.query(make_type1(block_bytes(excerpt, b)));
    if (!section) {
      res.matched = false;
      res.sections.clear();
      return res;
    }
    sections.push_back(*section);
  }
  res.matched = true;
  if (res.blocks_queried == 0) {
    res.assumed_positive = true;
    return res;
  }
  std::sort(sections.begin(), sections.end());
  sections.erase(std::unique(sections.begin(), sections.end()), sections.end());
  res.sections = std::move(sections);
  return res;
}

FlowDetermination flow_determination(ByteView excerpt, const ArchiveSegment& seg,
                                     const std::vector<std::uint32_t>& sections,
                                     const QueryOptions& opts) {
  FlowDetermination res;
  const std::vector<Block> blocks = excerpt_blocks(excerpt, seg.cfg.partition);
  std::vector<Block> kept;
  for (const Block& b : blocks) {
    if (b.kept) kept.push_back(b);
  }

  std::vector<FlowKey> candidates;
  if (opts.use_index && seg.cfg.index_enabled && !sections.empty()) {
    candidates = candidate_flows(seg.index_table(), seg.flows, sections);
  } else {
    candidates = seg.flows.flows();
  }
  res.candidates_examined = candidates.size();

  for (const FlowKey& flow : candidates) {
    bool all_positive = true;
    std::uint32_t confirmed = 0;
    for (const Block& b : kept) {
      ++res.type2_queries;
      if (!seg.msbf.query(make_type2(block_bytes(excerpt, b), flow))) {
        all_positive = false;
        break;
      }
      ++confirmed;
    }
    if (all_positive) {
      res.flows.push_back(FlowHit{flow, confirmed});
    }
  }
  return res;
}

bool AttributionReport::contains_flow(const FlowKey& flow) const {
  for (const SegmentReport& seg : segments) {
    for (const FlowHit& hit : seg.flows) {
      if (hit.flow == flow) return true;
    }
  }
  return false;
}

AttributionReport investigate(const ExcerptQuery& q,
                              std::span<const ArchiveSegment> archive,
                              const QueryOptions& opts) {
  AttributionReport report;
  for (std::size_t i = 0; i < archive.size(); ++i) {
    const ArchiveSegment& seg = archive[i];
    if (q.from_ts && seg.interval_end_us < *q.from_ts) continue;
    if (q.to_ts && seg.interval_start_us > *q.to_ts) continue;
    ++report.segments_checked;

    const SegmentAppearance app = appearance_check(q.bytes, seg);
    if (!app.matched) continue;

    SegmentReport sr;
    sr.segment_index = i;
    sr.interval_start_us = seg.interval_start_us;
    sr.interval_end_us = seg.interval_end_us;
    sr.matched = true;
    sr.assumed_positive = app.assumed_positive;
    sr.blocks_queried = app.blocks_queried;

    FlowDetermination det = flow_determination(q.bytes, seg, app.sections, opts);
    sr.flows = std::move(det.flows);
    sr.candidates_examined = det.candidates_examined;
    sr.type2_queries = det.type2_queries;
    report.candidates_total += sr.candidates_examined;
    report.type2_queries_total += sr.type2_queries;
    report.segments.push_back(std::move(sr));
  }
  return report;
}

}  // namespace cbid
