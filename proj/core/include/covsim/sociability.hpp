#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace covsim {

enum class object_class : std::uint8_t { person, car, truck, bicycle, bus };

constexpr std::array<object_class, 5> kAllClasses = {
    object_class::person, object_class::car, object_class::truck,
    object_class::bicycle, object_class::bus};
constexpr std::size_t kClassCount = kAllClasses.size();

std::string_view to_string(object_class);
std::optional<object_class> parse_object_class(std::string_view);

constexpr double kPersonHeightM = 1.70;
constexpr double kFeetPerMeter = 3.28084;
constexpr double kSafeDistanceFt = 6.0;

struct bbox {
  double x{0.0};
  double y{0.0};
  double w{1.0};
  double h{1.0};

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
};

struct detection {
  object_class cls{object_class::person};
  bbox box;
};

struct detection_frame {
  std::string camera_id;
  std::int64_t t{0};  // UTC seconds
  std::vector<detection> objects;
};

// Meters per pixel assuming every person is kPersonHeightM tall. Throws error
// for a non-positive height.
double rp_ratio(bbox const&);

// Centroid distance in feet using the mean R-P ratio of both boxes.
double pair_distance_ft(bbox const& a, bbox const& b);

struct pair_measure {
  std::size_t a{0};  // indices into detection_frame::objects
  std::size_t b{0};
  double distance_ft{0.0};
  bool violation{false};  // distance < kSafeDistanceFt
};

// Every unordered pair of persons in the frame.
std::vector<pair_measure> frame_pairs(detection_frame const&);

using class_counts = std::array<std::int64_t, kClassCount>;

struct frame_rate {
  std::string camera_id;
  std::int64_t t{0};
  std::optional<double> safety_rate;
};

struct sociability_report {
  std::int64_t frames{0};
  std::int64_t total_pairs{0};
  std::int64_t total_violations{0};
  double avg_ped_density{0.0};
  std::int64_t max_ped_density{0};
  // Pooled over all pairs; empty when no frame has two persons.
  std::optional<double> safety_rate;
  // Mean over frames with at least one pair.
  std::optional<double> mean_frame_safety_rate;
  std::array<double, kClassCount> class_avg_density{};
  class_counts class_max_density{};
  std::vector<frame_rate> per_frame;
};

// Partial aggregate over a set of frames. merge() is associative and
// commutative up to the order of per_frame entries, which report() sorts.
class sociability_accumulator {
public:
  void add(detection_frame const&);
  void merge(sociability_accumulator const&);
  bool empty() const { return frames_ == 0; }
  // Throws error when no frame was added.
  sociability_report report() const;

private:
  std::int64_t frames_{0};
  std::int64_t pairs_{0};
  std::int64_t violations_{0};
  class_counts totals_{};
  class_counts max_{};
  std::vector<frame_rate> per_frame_;
};

// Throws error on an empty stream.
sociability_report aggregate(std::span<detection_frame const>);

struct temporal_profile {
  std::array<class_counts, 24> totals{};  // [hour][class]
  std::array<std::int64_t, 24> frames{};

  bool empty_hour(int h) const { return frames[h] == 0; }
  std::optional<double> mean(object_class, int hour) const;
};

// Buckets frames by local hour of day, t + tz_offset_h hours. Throws error on
// an empty stream.
temporal_profile make_temporal_profile(std::span<detection_frame const>,
                                       double tz_offset_h);

// One frame per line. Throws parse_error with the line number on malformed
// input, non-positive box sizes, unknown classes, or timestamps decreasing
// within a camera's stream.
std::vector<detection_frame> parse_frames(std::string const& text,
                                          std::string const& source);
std::vector<detection_frame> load_frames(std::filesystem::path const&);
std::string frame_to_json(detection_frame const&);

std::string sociability_report_to_json(sociability_report const&);
// Columns: class,hour,mean_density,frames. Empty hours have an empty mean.
void write_profile_csv(std::ostream&, temporal_profile const&);

}  // namespace covsim
