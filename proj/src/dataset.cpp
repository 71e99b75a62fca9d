#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "thermadapt/dataset.hpp"
#include "thermadapt/parallel.hpp"

namespace thermadapt {
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string describe_box(const BoundingBox& b) {
  std::ostringstream ss;
  ss << '[' << b.xmin() << ',' << b.ymin() << ',' << b.xmax() << ',' << b.ymax() << ']';
  return ss.str();
}

int channels_of(const AnyImage& img) {
  return std::holds_alternative<GrayImage>(img) ? 1 : 3;
}

}  // namespace

BoundingBox::BoundingBox(double xmin, double ymin, double xmax, double ymax)
    : xmin_(xmin), ymin_(ymin), xmax_(xmax), ymax_(ymax) {
  if (!std::isfinite(xmin) || !std::isfinite(ymin) || !std::isfinite(xmax) ||
      !std::isfinite(ymax)) {
    throw Error(ErrorCode::InvalidBox, "non-finite box coordinate");
  }
  if (xmax <= xmin || ymax <= ymin) {
    throw Error(ErrorCode::DegenerateBox, "box " + describe_box(*this) + " has no area");
  }
  if (xmin < 0 || ymin < 0) {
    throw Error(ErrorCode::InvalidBox, "box " + describe_box(*this) + " has negative coordinates");
  }
}

ObjectInstance::ObjectInstance(std::string label, BoundingBox b, bool is_difficult)
    : class_label(std::move(label)), box(b), difficult(is_difficult) {
  if (class_label.empty()) throw Error(ErrorCode::MissingField, "empty class label");
}

AnnotationSet::AnnotationSet(std::string image_id, int width, int height,
                             std::vector<ObjectInstance> objects)
    : image_id_(std::move(image_id)), width_(width), height_(height),
      objects_(std::move(objects)) {
  if (width_ < 0 || height_ < 0) {
    throw Error(ErrorCode::InvalidParams, image_id_ + ": negative frame size");
  }
  for (const ObjectInstance& obj : objects_) {
    if (obj.box.xmax() > width_ || obj.box.ymax() > height_) {
      throw Error(ErrorCode::BoxOutOfFrame,
                  image_id_ + ": box " + describe_box(obj.box) + " exceeds frame " +
                      std::to_string(width_) + "x" + std::to_string(height_));
    }
  }
}

AnnotationSet AnnotationSet::with_image_id(std::string image_id) const {
  AnnotationSet copy = *this;
  copy.image_id_ = std::move(image_id);
  return copy;
}

AnnotationSet AnnotationSet::without_objects() const {
  return AnnotationSet(image_id_, width_, height_);
}

AnyImage DomainRecord::image() const {
  if (pixels) return *pixels;
  if (image_path.empty()) {
    throw Error(ErrorCode::Io, image_id + ": record has neither pixels nor a path");
  }
  return read_png(image_path);
}

bool operator==(const DomainRecord& a, const DomainRecord& b) {
  if (a.image_id != b.image_id || a.image_path != b.image_path ||
      !(a.annotations == b.annotations)) {
    return false;
  }
  if (a.pixels == b.pixels) return true;
  if (!a.pixels || !b.pixels) return false;
  return *a.pixels == *b.pixels;
}

DomainRecord make_record(AnnotationSet annotations, AnyImage image) {
  if (image_width(image) != annotations.width() || image_height(image) != annotations.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                annotations.image_id() + ": image size differs from annotation frame");
  }
  std::string id = annotations.image_id();
  return DomainRecord{std::move(id), {}, std::make_shared<const AnyImage>(std::move(image)),
                      std::move(annotations)};
}

DomainDataset::DomainDataset(std::string name, std::vector<DomainRecord> records, bool labelled)
    : name_(std::move(name)), records_(std::move(records)), labelled_(labelled) {
  std::set<std::string_view> seen;
  for (const DomainRecord& r : records_) {
    if (!seen.insert(r.image_id).second) {
      throw Error(ErrorCode::DuplicateId, name_ + ": duplicate image id '" + r.image_id + "'");
    }
    if (r.annotations.image_id() != r.image_id) {
      throw Error(ErrorCode::InvalidParams,
                  name_ + ": record '" + r.image_id + "' carries annotations for '" +
                      r.annotations.image_id() + "'");
    }
    if (!labelled_ && !r.annotations.objects().empty()) {
      throw Error(ErrorCode::InvalidParams,
                  name_ + ": unlabelled domain record '" + r.image_id + "' has objects");
    }
  }
}

const DomainRecord* DomainDataset::find(std::string_view image_id) const {
  for (const DomainRecord& r : records_) {
    if (r.image_id == image_id) return &r;
  }
  return nullptr;
}

std::vector<std::string> DomainDataset::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(records_.size());
  for (const DomainRecord& r : records_) ids.push_back(r.image_id);
  return ids;
}

std::set<std::string> DomainDataset::class_labels() const {
  std::set<std::string> labels;
  for (const DomainRecord& r : records_) {
    for (const ObjectInstance& obj : r.annotations.objects()) labels.insert(obj.class_label);
  }
  return labels;
}

DomainDataset DomainDataset::renamed(std::string name) const {
  DomainDataset copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

DomainDataset DomainDataset::unlabelled() const {
  std::vector<DomainRecord> records = records_;
  for (DomainRecord& r : records) r.annotations = r.annotations.without_objects();
  return DomainDataset(name_, std::move(records), false);
}

DomainDataset DomainDataset::subset(const std::set<std::string>& ids) const {
  std::vector<DomainRecord> records;
  for (const DomainRecord& r : records_) {
    if (ids.count(r.image_id) != 0) records.push_back(r);
  }
  return DomainDataset(name_, std::move(records), labelled_);
}

DomainDataset load_domain(const fs::path& root, bool labelled) {
  const fs::path image_dir = root / "images";
  const fs::path ann_dir = root / "annotations";
  if (!fs::is_directory(image_dir)) {
    throw Error(ErrorCode::Io, "missing images directory " + image_dir.string());
  }
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      images.push_back(entry.path());
    }
  }
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });

  std::vector<DomainRecord> records;
  records.reserve(images.size());
  for (const fs::path& img_path : images) {
    const std::string id = img_path.stem().string();
    const PngInfo info = read_png_info(img_path);
    if (info.bit_depth != 8 || info.channels == 0) {
      throw Error(ErrorCode::UnsupportedImage,
                  img_path.string() + ": only 8-bit gray or RGB images are accepted");
    }
    if (!labelled) {
      records.push_back({id, img_path, nullptr, AnnotationSet(id, info.width, info.height)});
      continue;
    }
    const fs::path xml_path = ann_dir / (id + ".xml");
    if (!fs::is_regular_file(xml_path)) {
      throw Error(ErrorCode::MissingAnnotation, "no annotation for image '" + id + "'");
    }
    AnnotationSet parsed = parse_voc_annotation(read_text(xml_path));
    if (parsed.width() != info.width || parsed.height() != info.height) {
      throw Error(ErrorCode::DimensionMismatch,
                  id + ": annotation says " + std::to_string(parsed.width()) + "x" +
                      std::to_string(parsed.height()) + ", image is " +
                      std::to_string(info.width) + "x" + std::to_string(info.height));
    }
    records.push_back({id, img_path, nullptr, parsed.with_image_id(id)});
  }
  return DomainDataset(root.filename().string(), std::move(records), labelled);
}

void save_domain(const DomainDataset& domain, const fs::path& root, int jobs) {
  const fs::path image_dir = root / "images";
  const fs::path ann_dir = root / "annotations";
  fs::create_directories(image_dir);
  if (domain.labelled()) fs::create_directories(ann_dir);
  const auto& records = domain.records();
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const DomainRecord& r = records[i];
    const fs::path dst = image_dir / (r.image_id + ".png");
    int depth = 0;
    if (r.pixels) {
      write_png(dst, *r.pixels);
      depth = channels_of(*r.pixels);
    } else {
      std::error_code ec;
      if (!fs::exists(dst) || !fs::equivalent(r.image_path, dst, ec)) {
        fs::copy_file(r.image_path, dst, fs::copy_options::overwrite_existing);
      }
      depth = read_png_info(dst).channels;
    }
    if (domain.labelled()) {
      write_text(ann_dir / (r.image_id + ".xml"), serialize_voc_annotation(r.annotations, depth));
    }
  });
}

SpectralPairing pair_spectral(const DomainDataset& visible, const DomainDataset& thermal) {
  std::map<std::string_view, const DomainRecord*> by_id;
  for (const DomainRecord& r : thermal.records()) by_id.emplace(r.image_id, &r);

  SpectralPairing out;
  std::set<std::string_view> matched;
  for (const DomainRecord& v : visible.records()) {
    auto it = by_id.find(v.image_id);
    if (it == by_id.end()) {
      out.unpaired_visible.push_back(v.image_id);
    } else {
      out.pairs.push_back({v, *it->second});
      matched.insert(it->first);
    }
  }
  for (const DomainRecord& t : thermal.records()) {
    if (matched.count(t.image_id) == 0) out.unpaired_thermal.push_back(t.image_id);
  }
  if (out.pairs.empty()) {
    throw Error(ErrorCode::EmptyIntersection,
                "domains '" + visible.name() + "' and '" + thermal.name() + "' share no image id");
  }
  std::sort(out.unpaired_visible.begin(), out.unpaired_visible.end());
  std::sort(out.unpaired_thermal.begin(), out.unpaired_thermal.end());
  return out;
}

std::set<std::string> read_id_list(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::set<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(first, last - first + 1));
  }
  return ids;
}

}  // namespace thermadapt
