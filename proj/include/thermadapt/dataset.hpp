#pragma once

// Annotated image domains in a VOC-style layout:
//
//   <root>/images/<image_id>.png
//   <root>/annotations/<image_id>.xml     (labelled domains only)
//
// Boxes use the continuous convention: a box covers [xmin, xmax) x [ymin, ymax)
// and its area is (xmax - xmin) * (ymax - ymin), with no +1 per axis.

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "thermadapt/image.hpp"

namespace thermadapt {

class BoundingBox {
 public:
  // Throws DegenerateBox when xmax <= xmin or ymax <= ymin, InvalidBox for
  // negative or non-finite coordinates.
  BoundingBox(double xmin, double ymin, double xmax, double ymax);

  double xmin() const noexcept { return xmin_; }
  double ymin() const noexcept { return ymin_; }
  double xmax() const noexcept { return xmax_; }
  double ymax() const noexcept { return ymax_; }
  double width() const noexcept { return xmax_ - xmin_; }
  double height() const noexcept { return ymax_ - ymin_; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double xmin_;
  double ymin_;
  double xmax_;
  double ymax_;
};

struct ObjectInstance {
  ObjectInstance(std::string class_label, BoundingBox box, bool difficult = false);

  std::string class_label;
  BoundingBox box;
  bool difficult = false;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

class AnnotationSet {
 public:
  // Throws BoxOutOfFrame if any box leaves [0,width] x [0,height].
  AnnotationSet(std::string image_id, int width, int height,
                std::vector<ObjectInstance> objects = {});

  const std::string& image_id() const noexcept { return image_id_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<ObjectInstance>& objects() const noexcept { return objects_; }

  AnnotationSet with_image_id(std::string image_id) const;
  AnnotationSet without_objects() const;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;

 private:
  std::string image_id_;
  int width_;
  int height_;
  std::vector<ObjectInstance> objects_;
};

// One image of a domain. Pixels are either held in memory (generated
// domains) or decoded on demand from image_path (loaded domains).
struct DomainRecord {
  std::string image_id;
  std::filesystem::path image_path;
  std::shared_ptr<const AnyImage> pixels;
  AnnotationSet annotations;

  AnyImage image() const;

  friend bool operator==(const DomainRecord& a, const DomainRecord& b);
};

DomainRecord make_record(AnnotationSet annotations, AnyImage image);

class DomainDataset {
 public:
  // Throws DuplicateId on repeated image ids and InvalidParams if an
  // unlabelled domain carries objects.
  DomainDataset(std::string name, std::vector<DomainRecord> records, bool labelled);

  const std::string& name() const noexcept { return name_; }
  bool labelled() const noexcept { return labelled_; }
  const std::vector<DomainRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const DomainRecord* find(std::string_view image_id) const;
  std::vector<std::string> image_ids() const;
  std::set<std::string> class_labels() const;

  DomainDataset renamed(std::string name) const;
  DomainDataset unlabelled() const;
  // Records whose id is in `ids`, in this domain's order.
  DomainDataset subset(const std::set<std::string>& ids) const;

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;

 private:
  std::string name_;
  std::vector<DomainRecord> records_;
  bool labelled_;
};

// VOC XML. Parsing keeps objects in document order, defaults a missing
// <difficult> to false and skips unknown elements. image_id is the stem of
// <filename>. Serialization writes <depth> only when it is known (> 0).
AnnotationSet parse_voc_annotation(std::string_view xml_text);
std::string serialize_voc_annotation(const AnnotationSet& ann, int depth = 0);

// Loads <root>/images/*.png sorted by image_id. Only the PNG header is read
// here; pixels stay on disk until DomainRecord::image() is called.
DomainDataset load_domain(const std::filesystem::path& root, bool labelled);

// Writes the standard layout. Existing files with the same names are replaced.
void save_domain(const DomainDataset& domain, const std::filesystem::path& root,
                 int jobs = 1);

struct SpectralPair {
  DomainRecord visible;
  DomainRecord thermal;
};

struct SpectralPairing {
  std::vector<SpectralPair> pairs;
  std::vector<std::string> unpaired_visible;
  std::vector<std::string> unpaired_thermal;
};

// Matches records by identical image_id. Throws EmptyIntersection when no id
// is shared.
SpectralPairing pair_spectral(const DomainDataset& visible, const DomainDataset& thermal);

// Reads a newline-separated id list ('#' comments and blank lines ignored).
std::set<std::string> read_id_list(const std::filesystem::path& path);

}  // namespace thermadapt
