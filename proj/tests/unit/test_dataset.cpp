#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_util.hpp"
#include "thermadapt/dataset.hpp"
#include "thermadapt/error.hpp"

using namespace thermadapt;
using thermadapt::testing::TempDir;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::Io;
}

const char* kOnePerson = R"(<annotation>
  <folder>FIR</folder>
  <filename>img001.png</filename>
  <size><width>100</width><height>100</height><depth>1</depth></size>
  <object>
    <name>person</name>
    <pose>Unspecified</pose>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>50</xmax><ymax>80</ymax></bndbox>
  </object>
</annotation>)";

TEST(BoundingBox, ValidBoxHasContinuousArea) {
  BoundingBox b(10, 20, 50, 80);
  EXPECT_DOUBLE_EQ(b.width(), 40);
  EXPECT_DOUBLE_EQ(b.height(), 60);
  EXPECT_DOUBLE_EQ(b.area(), 2400);
}

TEST(BoundingBox, RejectsInvalidGeometry) {
  EXPECT_EQ(code_of([] { BoundingBox(50, 20, 10, 80); }), ErrorCode::DegenerateBox);
  EXPECT_EQ(code_of([] { BoundingBox(10, 20, 10, 80); }), ErrorCode::DegenerateBox);
  EXPECT_EQ(code_of([] { BoundingBox(0, 5, 10, 5); }), ErrorCode::DegenerateBox);
  EXPECT_EQ(code_of([] { BoundingBox(-1, 0, 10, 10); }), ErrorCode::InvalidBox);
  EXPECT_EQ(code_of([] { BoundingBox(0, 0, std::numeric_limits<double>::quiet_NaN(), 10); }),
            ErrorCode::InvalidBox);
  EXPECT_EQ(code_of([] { BoundingBox(0, 0, std::numeric_limits<double>::infinity(), 10); }),
            ErrorCode::InvalidBox);
}

TEST(ObjectInstance, RequiresLabel) {
  EXPECT_EQ(code_of([] { ObjectInstance("", BoundingBox(0, 0, 1, 1)); }), ErrorCode::MissingField);
}

TEST(AnnotationSet, BoxesMustStayInFrame) {
  EXPECT_NO_THROW(AnnotationSet("a", 10, 10, {ObjectInstance("p", BoundingBox(0, 0, 10, 10))}));
  EXPECT_EQ(code_of([] {
              AnnotationSet("a", 10, 10, {ObjectInstance("p", BoundingBox(0, 0, 10.5, 10))});
            }),
            ErrorCode::BoxOutOfFrame);
}

TEST(ParseVoc, EmptyObjectList) {
  const auto a = parse_voc_annotation(
      "<annotation><filename>x.png</filename><size><width>4</width><height>3</height></size>"
      "</annotation>");
  EXPECT_EQ(a.image_id(), "x");
  EXPECT_EQ(a.width(), 4);
  EXPECT_EQ(a.height(), 3);
  EXPECT_TRUE(a.objects().empty());
}

TEST(ParseVoc, SingleObjectTranscribed) {
  const auto a = parse_voc_annotation(kOnePerson);
  ASSERT_EQ(a.objects().size(), 1u);
  EXPECT_EQ(a.objects()[0], ObjectInstance("person", BoundingBox(10, 20, 50, 80), false));
}

TEST(ParseVoc, DegenerateBoxRejected) {
  std::string xml = kOnePerson;
  xml.replace(xml.find("<xmin>10"), 8, "<xmin>90");
  EXPECT_EQ(code_of([&] { parse_voc_annotation(xml); }), ErrorCode::DegenerateBox);
}

TEST(ParseVoc, ErrorsAreClassified) {
  EXPECT_EQ(code_of([] { parse_voc_annotation("<annotation><filename>"); }),
            ErrorCode::MalformedXml);
  EXPECT_EQ(code_of([] { parse_voc_annotation("<annotation><size><width>1</width>"
                                              "<height>1</height></size></annotation>"); }),
            ErrorCode::MissingField);
  std::string no_bndbox = kOnePerson;
  const auto s = no_bndbox.find("<bndbox>");
  no_bndbox.erase(s, no_bndbox.find("</bndbox>") + 9 - s);
  EXPECT_EQ(code_of([&] { parse_voc_annotation(no_bndbox); }), ErrorCode::MissingField);
  std::string bad_number = kOnePerson;
  bad_number.replace(bad_number.find("<ymin>20"), 8, "<ymin>2x");
  EXPECT_EQ(code_of([&] { parse_voc_annotation(bad_number); }), ErrorCode::MalformedXml);
}

TEST(ParseVoc, DifficultFlagAndDocumentOrder) {
  const auto a = parse_voc_annotation(R"(<annotation><filename>d/y.jpg</filename>
    <size><width>50</width><height>50</height></size>
    <object><name>car</name><difficult>1</difficult>
      <bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>
    <object><name>bike</name><difficult>0</difficult>
      <bndbox><xmin>2.5</xmin><ymin>3</ymin><xmax>7</xmax><ymax>9</ymax></bndbox></object>
  </annotation>)");
  EXPECT_EQ(a.image_id(), "y");
  ASSERT_EQ(a.objects().size(), 2u);
  EXPECT_EQ(a.objects()[0].class_label, "car");
  EXPECT_TRUE(a.objects()[0].difficult);
  EXPECT_EQ(a.objects()[1].class_label, "bike");
  EXPECT_FALSE(a.objects()[1].difficult);
  EXPECT_DOUBLE_EQ(a.objects()[1].box.xmin(), 2.5);
}

TEST(SerializeVoc, EmptyAndOrdered) {
  const AnnotationSet empty("e", 8, 6);
  const std::string xml = serialize_voc_annotation(empty);
  EXPECT_NE(xml.find("<filename>e.png</filename>"), std::string::npos);
  EXPECT_NE(xml.find("<width>8</width>"), std::string::npos);
  EXPECT_EQ(xml.find("<object>"), std::string::npos);

  const AnnotationSet two("t", 100, 100,
                          {ObjectInstance("first", BoundingBox(1, 2, 3, 4)),
                           ObjectInstance("second", BoundingBox(5, 6, 7, 8), true)});
  const std::string x2 = serialize_voc_annotation(two);
  EXPECT_LT(x2.find("first"), x2.find("second"));
  EXPECT_EQ(parse_voc_annotation(x2), two);
}

TEST(SerializeVoc, RoundTripRandomSets) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> labels{"person", "car", "a&b <c>", "bike'\""};
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(u(rng) * 640);
    const int h = 1 + static_cast<int>(u(rng) * 480);
    std::vector<ObjectInstance> objs;
    const int n = static_cast<int>(u(rng) * 6);
    for (int i = 0; i < n; ++i) {
      const double x0 = u(rng) * (w - 0.01);
      const double y0 = u(rng) * (h - 0.01);
      const double x1 = x0 + (w - x0) * (0.001 + 0.999 * u(rng));
      const double y1 = y0 + (h - y0) * (0.001 + 0.999 * u(rng));
      if (!(x1 > x0 && y1 > y0)) continue;
      objs.emplace_back(labels[rng() % labels.size()], BoundingBox(x0, y0, x1, y1), rng() % 2);
    }
    const AnnotationSet a("id_" + std::to_string(trial), w, h, objs);
    EXPECT_EQ(parse_voc_annotation(serialize_voc_annotation(a, 3)), a);
  }
}

// Writes n gray images of size w x h; annotations for the first `with_xml`.
void make_domain(const fs::path& root, int n, int with_xml, int w = 8, int h = 6) {
  for (int i = 0; i < n; ++i) {
    const std::string id = "im" + std::to_string(i);
    GrayImage img(w, h, static_cast<std::uint8_t>(10 * i));
    fs::create_directories(root / "images");
    write_png(root / "images" / (id + ".png"), img);
    if (i < with_xml) {
      const AnnotationSet a(id, w, h, {ObjectInstance("person", BoundingBox(1, 1, 4, 4))});
      thermadapt::testing::write_text(root / "annotations" / (id + ".xml"),
                                      serialize_voc_annotation(a, 1));
    }
  }
}

TEST(LoadDomain, LabelledAndUnlabelled) {
  TempDir tmp;
  make_domain(tmp / "d", 3, 3);
  const auto labelled = load_domain(tmp / "d", true);
  EXPECT_EQ(labelled.size(), 3u);
  EXPECT_EQ(labelled.name(), "d");
  EXPECT_EQ(labelled.image_ids(), (std::vector<std::string>{"im0", "im1", "im2"}));
  for (const auto& r : labelled.records()) EXPECT_EQ(r.annotations.objects().size(), 1u);

  const auto unlabelled = load_domain(tmp / "d", false);
  EXPECT_EQ(unlabelled.size(), 3u);
  for (const auto& r : unlabelled.records()) EXPECT_TRUE(r.annotations.objects().empty());

  EXPECT_EQ(load_domain(tmp / "d", true), labelled);
}

TEST(LoadDomain, MissingAnnotationNamesStem) {
  TempDir tmp;
  make_domain(tmp / "d", 3, 2);
  try {
    load_domain(tmp / "d", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnnotation);
    EXPECT_NE(std::string(e.what()).find("im2"), std::string::npos);
  }
}

TEST(LoadDomain, DimensionMismatch) {
  TempDir tmp;
  make_domain(tmp / "d", 1, 0);
  thermadapt::testing::write_text(tmp / "d/annotations/im0.xml",
                                  serialize_voc_annotation(AnnotationSet("im0", 16, 6)));
  EXPECT_EQ(code_of([&] { load_domain(tmp / "d", true); }), ErrorCode::DimensionMismatch);
}

TEST(LoadDomain, RejectsNonPng) {
  TempDir tmp;
  thermadapt::testing::write_text(tmp / "d/images/bad.png", "not a png at all");
  EXPECT_EQ(code_of([&] { load_domain(tmp / "d", false); }), ErrorCode::UnsupportedImage);
}

TEST(SaveDomain, RoundTripsInMemoryDomain) {
  TempDir tmp;
  std::vector<DomainRecord> recs;
  RgbImage rgb(5, 4);
  for (std::size_t i = 0; i < rgb.bytes().size(); ++i) rgb.bytes()[i] = static_cast<std::uint8_t>(i);
  recs.push_back(make_record(
      AnnotationSet("b", 5, 4, {ObjectInstance("car", BoundingBox(0.5, 1, 4, 3.25))}), rgb));
  recs.push_back(make_record(AnnotationSet("a", 5, 4), rgb));
  const DomainDataset d("mem", recs, true);
  save_domain(d, tmp / "out");
  const DomainDataset back = load_domain(tmp / "out", true);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.records()[0].image_id, "a");
  EXPECT_EQ(back.find("b")->annotations, recs[0].annotations);
  EXPECT_EQ(back.find("b")->image(), AnyImage(rgb));
}

TEST(DomainDataset, Invariants) {
  const auto rec = make_record(AnnotationSet("a", 2, 2), GrayImage(2, 2));
  EXPECT_EQ(code_of([&] { DomainDataset("d", {rec, rec}, true); }), ErrorCode::DuplicateId);
  const auto with_obj =
      make_record(AnnotationSet("b", 2, 2, {ObjectInstance("p", BoundingBox(0, 0, 1, 1))}),
                  GrayImage(2, 2));
  EXPECT_EQ(code_of([&] { DomainDataset("d", {with_obj}, false); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([&] { make_record(AnnotationSet("c", 3, 2), GrayImage(2, 2)); }),
            ErrorCode::DimensionMismatch);

  const DomainDataset d("d", {rec, with_obj}, true);
  EXPECT_EQ(d.class_labels(), (std::set<std::string>{"p"}));
  EXPECT_EQ(d.subset({"b", "zzz"}).image_ids(), (std::vector<std::string>{"b"}));
  EXPECT_FALSE(d.unlabelled().labelled());
  EXPECT_TRUE(d.unlabelled().find("b")->annotations.objects().empty());
}

DomainDataset ids_domain(const std::vector<std::string>& ids) {
  std::vector<DomainRecord> recs;
  for (const auto& id : ids) recs.push_back(make_record(AnnotationSet(id, 1, 1), GrayImage(1, 1)));
  return DomainDataset("x", recs, false);
}

TEST(PairSpectral, IntersectionAndLeftovers) {
  const auto p = pair_spectral(ids_domain({"a", "b", "c"}), ids_domain({"b", "c", "d"}));
  ASSERT_EQ(p.pairs.size(), 2u);
  EXPECT_EQ(p.pairs[0].visible.image_id, "b");
  EXPECT_EQ(p.pairs[1].thermal.image_id, "c");
  EXPECT_EQ(p.unpaired_visible, (std::vector<std::string>{"a"}));
  EXPECT_EQ(p.unpaired_thermal, (std::vector<std::string>{"d"}));

  EXPECT_EQ(pair_spectral(ids_domain({"a", "b"}), ids_domain({"a", "b"})).pairs.size(), 2u);
  EXPECT_EQ(code_of([] { pair_spectral(ids_domain({"a"}), ids_domain({"b"})); }),
            ErrorCode::EmptyIntersection);
}

TEST(PairSpectral, LengthIsIntersectionSize) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> a, b;
    std::set<std::string> sa, sb;
    for (int i = 0; i < 30; ++i) {
      if (rng() % 2) { a.push_back("id" + std::to_string(i)); sa.insert(a.back()); }
      if (rng() % 2) { b.push_back("id" + std::to_string(i)); sb.insert(b.back()); }
    }
    std::size_t common = 0;
    for (const auto& id : sa) common += sb.count(id);
    if (common == 0) continue;
    EXPECT_EQ(pair_spectral(ids_domain(a), ids_domain(b)).pairs.size(), common);
  }
}

TEST(IdList, CommentsAndBlanks) {
  TempDir tmp;
  thermadapt::testing::write_text(tmp / "ids.txt", "# split\nset00_0001\n\n  set00_0002  \n#x\n");
  EXPECT_EQ(read_id_list(tmp / "ids.txt"), (std::set<std::string>{"set00_0001", "set00_0002"}));
}

TEST(Png, GrayAndRgbRoundTrip) {
  TempDir tmp;
  GrayImage g(3, 2, std::vector<std::uint8_t>{0, 1, 2, 253, 254, 255});
  write_png(tmp / "g.png", g);
  EXPECT_EQ(read_png(tmp / "g.png"), AnyImage(g));
  const PngInfo info = read_png_info(tmp / "g.png");
  EXPECT_EQ(info.width, 3);
  EXPECT_EQ(info.height, 2);
  EXPECT_EQ(info.channels, 1);
  EXPECT_EQ(info.bit_depth, 8);
  EXPECT_EQ(code_of([&] { read_png(tmp / "missing.png"); }), ErrorCode::Io);
}

}  // namespace
