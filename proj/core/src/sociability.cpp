#include "covsim/sociability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "fmt/core.h"
#include "json.hpp"

#include "covsim/csv.hpp"
#include "covsim/types.hpp"

using json = nlohmann::json;

namespace covsim {

std::string_view to_string(object_class const c) {
  switch (c) {
    case object_class::person: return "person";
    case object_class::car: return "car";
    case object_class::truck: return "truck";
    case object_class::bicycle: return "bicycle";
    case object_class::bus: return "bus";
  }
  return "?";
}

std::optional<object_class> parse_object_class(std::string_view const s) {
  for (auto const c : kAllClasses) {
    if (to_string(c) == s) {
      return c;
    }
  }
  return std::nullopt;
}

double rp_ratio(bbox const& b) {
  if (!(b.h > 0.0)) {
    throw error{fmt::format("bounding box height must be positive, got {}",
                            b.h)};
  }
  return kPersonHeightM / b.h;
}

double pair_distance_ft(bbox const& a, bbox const& b) {
  auto const ratio = (rp_ratio(a) + rp_ratio(b)) / 2.0;
  auto const px = std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
  return px * ratio * kFeetPerMeter;
}

std::vector<pair_measure> frame_pairs(detection_frame const& f) {
  std::vector<std::size_t> persons;
  for (std::size_t i = 0; i < f.objects.size(); ++i) {
    if (f.objects[i].cls == object_class::person) {
      persons.push_back(i);
    }
  }
  std::vector<pair_measure> out;
  if (persons.size() < 2) {
    return out;
  }
  out.reserve(persons.size() * (persons.size() - 1) / 2);
  for (std::size_t i = 0; i < persons.size(); ++i) {
    for (std::size_t j = i + 1; j < persons.size(); ++j) {
      auto const d = pair_distance_ft(f.objects[persons[i]].box,
                                      f.objects[persons[j]].box);
      out.push_back({persons[i], persons[j], d, d < kSafeDistanceFt});
    }
  }
  return out;
}

void sociability_accumulator::add(detection_frame const& f) {
  class_counts counts{};
  for (auto const& o : f.objects) {
    ++counts[static_cast<std::size_t>(o.cls)];
  }
  auto const pairs = frame_pairs(f);
  auto const violations = std::count_if(
      begin(pairs), end(pairs), [](pair_measure const& p) { return p.violation; });
  ++frames_;
  pairs_ += static_cast<std::int64_t>(pairs.size());
  violations_ += violations;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    totals_[c] += counts[c];
    max_[c] = std::max(max_[c], counts[c]);
  }
  frame_rate r{f.camera_id, f.t, std::nullopt};
  if (!pairs.empty()) {
    r.safety_rate = 1.0 - static_cast<double>(violations) /
                              static_cast<double>(pairs.size());
  }
  per_frame_.push_back(std::move(r));
}

void sociability_accumulator::merge(sociability_accumulator const& o) {
  frames_ += o.frames_;
  pairs_ += o.pairs_;
  violations_ += o.violations_;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    totals_[c] += o.totals_[c];
    max_[c] = std::max(max_[c], o.max_[c]);
  }
  per_frame_.insert(end(per_frame_), begin(o.per_frame_), end(o.per_frame_));
}

sociability_report sociability_accumulator::report() const {
  if (frames_ == 0) {
    throw error{"no frames to aggregate"};
  }
  sociability_report r;
  r.frames = frames_;
  r.total_pairs = pairs_;
  r.total_violations = violations_;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    r.class_avg_density[c] =
        static_cast<double>(totals_[c]) / static_cast<double>(frames_);
  }
  r.class_max_density = max_;
  auto const person = static_cast<std::size_t>(object_class::person);
  r.avg_ped_density = r.class_avg_density[person];
  r.max_ped_density = max_[person];
  if (pairs_ > 0) {
    r.safety_rate = static_cast<double>(pairs_ - violations_) /
                    static_cast<double>(pairs_);
  }
  r.per_frame = per_frame_;
  std::stable_sort(begin(r.per_frame), end(r.per_frame),
                   [](frame_rate const& a, frame_rate const& b) {
                     return std::tie(a.camera_id, a.t) <
                            std::tie(b.camera_id, b.t);
                   });
  double sum = 0.0;
  std::int64_t n = 0;
  for (auto const& f : r.per_frame) {
    if (f.safety_rate) {
      sum += *f.safety_rate;
      ++n;
    }
  }
  if (n > 0) {
    r.mean_frame_safety_rate = sum / static_cast<double>(n);
  }
  return r;
}

sociability_report aggregate(std::span<detection_frame const> frames) {
  if (frames.empty()) {
    throw error{"empty detection stream"};
  }
  sociability_accumulator acc;
  for (auto const& f : frames) {
    acc.add(f);
  }
  return acc.report();
}

std::optional<double> temporal_profile::mean(object_class const c,
                                             int const hour) const {
  if (frames[hour] == 0) {
    return std::nullopt;
  }
  return static_cast<double>(totals[hour][static_cast<std::size_t>(c)]) /
         static_cast<double>(frames[hour]);
}

temporal_profile make_temporal_profile(std::span<detection_frame const> frames,
                                       double const tz_offset_h) {
  if (frames.empty()) {
    throw error{"empty detection stream"};
  }
  auto const offset = static_cast<std::int64_t>(std::llround(tz_offset_h * 3600));
  temporal_profile p;
  for (auto const& f : frames) {
    auto local = (f.t + offset) % 86400;
    if (local < 0) {
      local += 86400;
    }
    auto const hour = static_cast<std::size_t>(local / 3600);
    ++p.frames[hour];
    for (auto const& o : f.objects) {
      ++p.totals[hour][static_cast<std::size_t>(o.cls)];
    }
  }
  return p;
}

std::vector<detection_frame> parse_frames(std::string const& text,
                                          std::string const& source) {
  std::vector<detection_frame> frames;
  std::map<std::string, std::int64_t> last_t;
  std::istringstream in{text};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    detection_frame f;
    try {
      auto const doc = json::parse(line);
      f.camera_id = doc.at("camera_id").get<std::string>();
      f.t = doc.at("t").get<std::int64_t>();
      for (auto const& o : doc.at("objects")) {
        auto const name = o.at("class").get<std::string>();
        auto const cls = parse_object_class(name);
        if (!cls) {
          throw parse_error{source, line_no,
                            fmt::format("unknown class '{}'", name)};
        }
        auto const& b = o.at("bbox");
        if (!b.is_array() || b.size() != 4) {
          throw parse_error{source, line_no, "bbox must be [x, y, w, h]"};
        }
        detection d{*cls, {b[0].get<double>(), b[1].get<double>(),
                           b[2].get<double>(), b[3].get<double>()}};
        if (!(d.box.w > 0.0) || !(d.box.h > 0.0)) {
          throw parse_error{source, line_no,
                            "bbox width and height must be positive"};
        }
        f.objects.push_back(d);
      }
    } catch (json::exception const& e) {
      throw parse_error{source, line_no, e.what()};
    }
    auto const [it, inserted] = last_t.try_emplace(f.camera_id, f.t);
    if (!inserted) {
      if (f.t < it->second) {
        throw parse_error{source, line_no,
                          fmt::format("timestamp {} decreases in stream of "
                                      "camera '{}'",
                                      f.t, f.camera_id)};
      }
      it->second = f.t;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<detection_frame> load_frames(std::filesystem::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_frames(ss.str(), path.string());
}

std::string frame_to_json(detection_frame const& f) {
  json objects = json::array();
  for (auto const& o : f.objects) {
    objects.push_back({{"class", to_string(o.cls)},
                       {"bbox", {o.box.x, o.box.y, o.box.w, o.box.h}}});
  }
  return json{{"camera_id", f.camera_id}, {"t", f.t}, {"objects", objects}}
      .dump();
}

namespace {

json optional_number(std::optional<double> const& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string sociability_report_to_json(sociability_report const& r) {
  json classes = json::object();
  for (auto const c : kAllClasses) {
    auto const i = static_cast<std::size_t>(c);
    classes[std::string{to_string(c)}] = {{"avg_density", r.class_avg_density[i]},
                                          {"max_density", r.class_max_density[i]}};
  }
  json per_frame = json::array();
  for (auto const& f : r.per_frame) {
    per_frame.push_back({{"camera_id", f.camera_id},
                         {"t", f.t},
                         {"safety_rate", optional_number(f.safety_rate)}});
  }
  json doc = {{"frames", r.frames},
              {"avg_ped_density", r.avg_ped_density},
              {"max_ped_density", r.max_ped_density},
              {"safety_rate", optional_number(r.safety_rate)},
              {"mean_frame_safety_rate", optional_number(r.mean_frame_safety_rate)},
              {"total_pairs", r.total_pairs},
              {"total_violations", r.total_violations},
              {"classes", classes},
              {"per_frame", per_frame}};
  return doc.dump(2);
}

void write_profile_csv(std::ostream& out, temporal_profile const& p) {
  out << "class,hour,mean_density,frames\n";
  for (auto const c : kAllClasses) {
    for (int h = 0; h < 24; ++h) {
      auto const m = p.mean(c, h);
      out << to_string(c) << ',' << h << ','
          << (m ? format_double(*m) : std::string{}) << ',' << p.frames[h]
          << '\n';
    }
  }
}

}  // namespace covsim
