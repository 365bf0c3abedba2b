#include "qmem/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qmem/random.hpp"

namespace qmem {

namespace {

PulseSpec centered(PulseSpec p, double center) {
  p.start_time = center - 0.5 * p.duration;
  return p;
}

bool contains(const PulseSpec& p, double t) { return t >= p.start_time && t <= p.end_time(); }

void sort_pulses(std::vector<PulseSpec>& pulses) {
  std::stable_sort(pulses.begin(), pulses.end(),
                   [](const PulseSpec& a, const PulseSpec& b) { return a.start_time < b.start_time; });
}

MarkerKind parse_marker_kind(const std::string& s) {
  for (auto k : {MarkerKind::input_signal, MarkerKind::readout_window, MarkerKind::detection_gate})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown timeline event kind: " + s);
}

PulseSpec pulse_from_event(const nlohmann::json& e) {
  PulseSpec p;
  p.name = e.value("name", std::string());
  p.shape = parse_pulse_shape(e.at("shape").get<std::string>());
  p.target = parse_transition(e.at("transition").get<std::string>());
  p.start_time = e.at("start_s").get<double>();
  p.duration = e.at("duration_s").get<double>();
  p.omega0 = two_pi * e.at("rabi_hz").get<double>();
  p.phase = e.value("phase_rad", 0.0);
  p.amplitude_scale = e.value("amplitude_scale", 1.0);
  p.center_offset = e.value("center_offset_hz", 0.0);
  p.nominal_area = e.value("area_rad", pi);
  p.beta = e.value("beta_per_s", 0.0);
  p.mu_chirp = e.value("mu_chirp", 0.0);
  p.bandwidth = e.value("bandwidth_hz", 0.0);
  p.fwhm = e.value("fwhm_s", 0.0);
  return p;
}

} // namespace

std::string to_string(MarkerKind kind) {
  switch (kind) {
  case MarkerKind::input_signal: return "input_signal";
  case MarkerKind::readout_window: return "readout_window";
  case MarkerKind::detection_gate: return "detection_gate";
  }
  return "unknown";
}

double Timeline::begin_time() const {
  double t = 0.0;
  if (signal) t = std::min(t, signal->start_time);
  for (const auto& p : pulses) t = std::min(t, p.start_time);
  for (const auto& m : markers) t = std::min(t, m.time - 0.5 * m.width);
  return t;
}

double Timeline::end_time() const {
  double t = total_span;
  if (signal) t = std::max(t, signal->end_time());
  for (const auto& p : pulses) t = std::max(t, p.end_time());
  for (const auto& m : markers) t = std::max(t, m.time + 0.5 * m.width);
  return t;
}

std::optional<Marker> Timeline::find_marker(MarkerKind kind, const std::string& label) const {
  for (const auto& m : markers)
    if (m.kind == kind && (label.empty() || m.label == label)) return m;
  return std::nullopt;
}

void validate(const Timeline& timeline) {
  for (std::size_t i = 0; i < timeline.pulses.size(); ++i) {
    validate(timeline.pulses[i]);
    if (i == 0) continue;
    const auto& prev = timeline.pulses[i - 1];
    const auto& cur = timeline.pulses[i];
    if (cur.start_time < prev.start_time) throw ConfigError("timeline pulses are not sorted");
    if (cur.start_time < prev.end_time())
      throw ConfigError("pulses overlap: " + prev.name + " and " + cur.name);
  }
  for (const auto& p : timeline.pulses)
    if (p.start_time < 0.0) throw ConfigError("control pulse starts before t = 0: " + p.name);
  if (timeline.signal && !timeline.pulses.empty() && timeline.signal->end_time() > timeline.pulses.front().start_time)
    throw ConfigError("input signal overlaps the first pulse");
}

nlohmann::json to_json(const Timeline& timeline) {
  struct Entry {
    double time;
    int order;
    nlohmann::json body;
  };
  std::vector<Entry> entries;
  int order = 0;
  for (const auto& p : timeline.pulses) {
    auto j = to_json(p);
    j["kind"] = "pulse";
    entries.push_back({p.start_time, order++, j});
  }
  for (const auto& m : timeline.markers) {
    entries.push_back({m.time - 0.5 * m.width, order++,
                       {{"kind", to_string(m.kind)}, {"label", m.label}, {"time_s", m.time}, {"width_s", m.width}}});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.time < b.time || (a.time == b.time && a.order < b.order);
  });
  nlohmann::json events = nlohmann::json::array();
  for (auto& e : entries) events.push_back(std::move(e.body));
  nlohmann::json doc = {{"total_span_s", timeline.total_span},
                        {"clock_jitter_s", timeline.clock_jitter},
                        {"events", events}};
  if (timeline.signal) doc["signal"] = to_json(*timeline.signal);
  if (timeline.timings) {
    const auto& t = *timeline.timings;
    doc["timings"] = {{"t0_s", t.t0}, {"t1_s", t.t1}, {"t2_s", t.t2}, {"t3_s", t.t3},
                      {"t4_s", t.t4}, {"echo_s", t.echo_time()}};
  }
  return doc;
}

Timeline timeline_from_json(const nlohmann::json& doc) {
  Timeline tl;
  tl.total_span = doc.value("total_span_s", 0.0);
  tl.clock_jitter = doc.value("clock_jitter_s", 0.0);
  if (doc.contains("signal")) tl.signal = pulse_from_event(doc.at("signal"));
  if (doc.contains("timings")) {
    const auto& t = doc.at("timings");
    tl.timings = NlpeTimings{t.at("t0_s"), t.at("t1_s"), t.at("t2_s"), t.at("t3_s"), t.at("t4_s")};
  }
  for (const auto& e : doc.value("events", nlohmann::json::array())) {
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "pulse") {
      tl.pulses.push_back(pulse_from_event(e));
    } else {
      tl.markers.push_back({parse_marker_kind(kind), e.value("label", std::string()), e.at("time_s").get<double>(),
                            e.value("width_s", 0.0)});
    }
  }
  sort_pulses(tl.pulses);
  validate(tl);
  return tl;
}

Timeline build_nlpe(const NlpeTimings& t, const NlpePresets& presets, const PulseSpec& signal, double readout_width) {
  if (!(t.t0 < t.t1 && t.t1 < t.t2 && t.t2 < t.t3 && t.t3 < t.t4))
    throw ConfigError("rephasing times must satisfy t0 < t1 < t2 < t3 < t4");
  const double echo = t.echo_time();
  if (!(echo > t.t4)) throw ConfigError("echo would be emitted before the last pulse");

  Timeline tl;
  tl.timings = t;
  tl.signal = centered(signal, t.t0);
  tl.pulses = {centered(presets.pi43, t.t1), centered(presets.pi32, t.t2), centered(presets.pi43, t.t3),
               centered(presets.pi32, t.t4)};
  for (const auto& p : tl.pulses)
    if (contains(p, echo)) throw ConfigError("echo falls inside pulse " + p.name);
  validate(tl);

  const double signal_width = signal.shape == PulseShape::truncated_gaussian ? signal.fwhm : signal.duration;
  tl.markers = {{MarkerKind::input_signal, "input", t.t0, signal_width},
                {MarkerKind::readout_window, "readout", echo, readout_width}};
  tl.total_span = std::max(tl.pulses.back().end_time(), echo + 0.5 * readout_width);
  return tl;
}

Ur4Phases ur4_phases(double delta, int n_blocks) {
  if (n_blocks < 1) throw ConfigError("UR4 needs at least one block");
  Ur4Phases u;
  u.delta = delta;
  u.phi2 = 0.5 * pi + delta;
  u.n_blocks = n_blocks;
  u.phases = {0.0, wrap_two_pi(u.phi2), wrap_two_pi(pi + 2.0 * u.phi2), wrap_two_pi(3.0 * pi + 3.0 * u.phi2)};
  return u;
}

Timeline build_chs_ur4(double tau, int n_pulses, const PulseSpec& rf_preset, double delta) {
  if (n_pulses < 4 || n_pulses % 4 != 0) throw ConfigError("UR4 pulse count must be a positive multiple of 4");
  if (!(tau > rf_preset.duration)) throw ConfigError("pulse interval shorter than the RF pulse");
  const Ur4Phases u = ur4_phases(delta, n_pulses / 4);
  Timeline tl;
  for (int k = 0; k < n_pulses; ++k) {
    PulseSpec p = centered(rf_preset, (k + 0.5) * tau);
    p.phase = wrap_two_pi(rf_preset.phase + u.phase_of(k));
    p.name = rf_preset.name + "_" + std::to_string(k);
    tl.pulses.push_back(p);
  }
  tl.total_span = n_pulses * tau;
  validate(tl);
  return tl;
}

Timeline build_nlpe_dd(const Timeline& nlpe, const Timeline& dd) {
  if (!nlpe.timings) throw ConfigError("DD insertion needs a rephasing timeline");
  if (dd.pulses.empty()) return nlpe;
  const NlpeTimings base = *nlpe.timings;
  const double origin = 0.5 * (base.t1 + base.t2);
  const double shift = dd.total_span;

  Timeline tl = nlpe;
  for (auto& p : tl.pulses)
    if (p.center_time() > base.t1) p.start_time += shift;
  for (auto& m : tl.markers)
    if (m.time > base.t1) m.time += shift;
  NlpeTimings t = base;
  t.t2 += shift;
  t.t3 += shift;
  t.t4 += shift;
  tl.timings = t;

  const PulseSpec* first_storage = nullptr;
  const PulseSpec* next_after = nullptr;
  for (const auto& p : tl.pulses) {
    if (p.center_time() <= base.t1) first_storage = &p;
    else if (!next_after) next_after = &p;
  }
  for (const auto& rf : dd.pulses) {
    PulseSpec p = rf;
    p.start_time += origin;
    if ((first_storage && p.start_time <= first_storage->end_time()) ||
        (next_after && p.end_time() >= next_after->start_time))
      throw ConfigError("DD block does not fit inside the spin-storage interval");
    tl.pulses.push_back(p);
  }
  sort_pulses(tl.pulses);
  tl.total_span = nlpe.total_span + shift;
  validate(tl);
  return tl;
}

Timeline build_superposition_readout(const Timeline& base, double splitting, double relative_phase,
                                     const std::optional<PulseSpec>& half_preset) {
  if (!base.timings) throw ConfigError("superposition readout needs a rephasing timeline");
  if (splitting < 0.0) throw ConfigError("readout splitting must be non-negative");
  const NlpeTimings t = *base.timings;
  auto last = std::find_if(base.pulses.rbegin(), base.pulses.rend(),
                           [&](const PulseSpec& p) { return std::abs(p.center_time() - t.t4) < 1e-12 * (1.0 + t.t4); });
  if (last == base.pulses.rend()) throw ConfigError("no readout pulse at t4");

  Timeline tl = base;
  const auto last_index = std::distance(base.pulses.begin(), std::next(last).base());
  tl.pulses.erase(tl.pulses.begin() + last_index);
  PulseSpec half = half_preset.value_or(*last);
  half.target = last->target;
  half.phase = half_preset ? half_preset->phase : last->phase;
  half.shape = PulseShape::half_pi_pair_member;
  half.nominal_area = 0.5 * last->nominal_area;

  if (splitting == 0.0) {
    // coincident halves add coherently into one pulse
    const Complex sum = 0.5 * (1.0 + std::polar(1.0, relative_phase));
    PulseSpec merged = half;
    merged.shape = PulseShape::chs;
    merged.amplitude_scale *= std::abs(sum);
    merged.phase = wrap_two_pi(half.phase + std::arg(sum));
    merged.nominal_area = last->nominal_area * std::abs(sum);
    merged.name = last->name;
    tl.pulses.push_back(centered(merged, t.t4));
  } else {
    if (!(splitting > half.duration)) throw ConfigError("readout splitting must exceed the half-pulse duration");
    PulseSpec first = centered(half, t.t4);
    PulseSpec second = centered(half, t.t4 + splitting);
    first.name = last->name + "_a";
    second.name = last->name + "_b";
    second.phase = wrap_two_pi(half.phase + relative_phase);
    tl.pulses.push_back(first);
    tl.pulses.push_back(second);
  }
  sort_pulses(tl.pulses);

  const double echo = t.echo_time();
  auto readout = std::find_if(tl.markers.begin(), tl.markers.end(),
                              [](const Marker& m) { return m.kind == MarkerKind::readout_window; });
  const double width = readout != tl.markers.end() ? readout->width : default_readout_width;
  if (splitting > 0.0) {
    const double lo = echo - 0.5 * width;
    for (const auto& p : tl.pulses)
      if (p.end_time() > lo && p.start_time < echo + 2.0 * splitting + 0.5 * width && p.center_time() >= t.t4)
        throw ConfigError("readout pulse overlaps the echo window");
    if (readout != tl.markers.end()) {
      readout->time = echo + splitting;
      readout->width = 2.0 * splitting + width;
    }
    tl.markers.push_back({MarkerKind::detection_gate, "early", echo, width});
    tl.markers.push_back({MarkerKind::detection_gate, "central", echo + splitting, width});
    tl.markers.push_back({MarkerKind::detection_gate, "late", echo + 2.0 * splitting, width});
  }
  tl.total_span = std::max(base.total_span, tl.pulses.back().end_time());
  if (readout != tl.markers.end()) tl.total_span = std::max(tl.total_span, readout->time + 0.5 * readout->width);
  validate(tl);
  return tl;
}

Timeline build_initialization(const LevelScheme& scheme, const InitializationReps& reps,
                              const InitializationPumps& pumps) {
  validate(scheme);
  using Line = std::pair<int, int>;
  const std::vector<Line> cleaning = {{1, 2}, {2, 2}, {3, 3}, {4, 3}, {5, 5}, {6, 4}, {3, 2}};
  const std::vector<Line> polarization = {{1, 2}, {2, 2}, {3, 3}, {4, 3}, {5, 5}, {3, 2}};
  const std::vector<Line> back = {{1, 2}, {2, 2}, {4, 3}, {5, 5}, {6, 4}};

  Timeline tl;
  double clock = 0.0;
  const auto add_phase = [&](const std::vector<Line>& lines, int n, double bandwidth, const std::string& tag) {
    for (int r = 0; r < n; ++r) {
      for (const auto& [g, e] : lines) {
        PulseSpec p;
        p.name = tag + "_f" + std::to_string(g) + std::to_string(e);
        p.shape = PulseShape::chirped_rectangular;
        p.duration = pumps.pulse_duration;
        p.bandwidth = bandwidth;
        p.target = {ground(g), excited(e)};
        p.nominal_area = 0.0;
        p.start_time = clock;
        clock += pumps.pulse_duration;
        tl.pulses.push_back(p);
      }
    }
  };
  add_phase(cleaning, reps.class_cleaning, pumps.clean_bandwidth, "clean");
  add_phase(polarization, reps.spin_polarization, pumps.clean_bandwidth, "polarize");
  add_phase(back, reps.back_burning, pumps.back_bandwidth, "backburn");
  tl.total_span = clock;
  return tl;
}

Timeline build_two_pulse_echo(double tau, const PulseSpec& rf_preset) {
  if (!(rf_preset.duration > 0.0)) throw ConfigError("RF pulse needs a positive duration");
  if (!(tau > rf_preset.duration)) throw ConfigError("echo delay shorter than the RF pulse");
  // first pulse centered at half its duration so the timeline starts at 0
  const double c0 = 0.5 * rf_preset.duration;
  PulseSpec half = centered(rf_preset, c0);
  half.shape = rf_preset.shape == PulseShape::chs ? PulseShape::half_pi_pair_member : rf_preset.shape;
  if (half.shape != PulseShape::half_pi_pair_member) half.amplitude_scale *= 0.5;
  half.nominal_area = 0.5 * rf_preset.nominal_area;
  half.name = rf_preset.name + "_half";
  PulseSpec full = centered(rf_preset, c0 + tau);
  Timeline tl;
  tl.pulses = {half, full};
  tl.markers = {{MarkerKind::readout_window, "probe", c0 + 2.0 * tau, 0.0}};
  tl.total_span = c0 + 2.0 * tau;
  validate(tl);
  return tl;
}

Timeline with_clock_jitter(const Timeline& timeline, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("clock jitter must be non-negative");
  Timeline tl = timeline;
  tl.clock_jitter = sigma;
  for (std::size_t k = 0; k < tl.pulses.size(); ++k) {
    const double z = normal_quantile(counter_uniform(seed, 0x6a177e5ULL, k));
    tl.pulses[k].start_time = std::max(0.0, tl.pulses[k].start_time + sigma * z);
  }
  sort_pulses(tl.pulses);
  validate(tl);
  return tl;
}

} // namespace qmem
