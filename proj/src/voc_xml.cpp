#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <charconv>
#include <sstream>

#include "thermadapt/dataset.hpp"

namespace thermadapt {
namespace {

namespace pt = boost::property_tree;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

const pt::ptree& require_child(const pt::ptree& node, const std::string& path,
                               const std::string& where) {
  auto child = node.get_child_optional(pt::ptree::path_type(path, '.'));
  if (!child) throw Error(ErrorCode::MissingField, where + ": missing <" + path + ">");
  return *child;
}

std::string require_text(const pt::ptree& node, const std::string& path,
                         const std::string& where) {
  return std::string(trim(require_child(node, path, where).data()));
}

double require_number(const pt::ptree& node, const std::string& path,
                      const std::string& where) {
  const std::string text = require_text(node, path, where);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedXml, where + ": <" + path + "> is not a number: '" + text + "'");
  }
  return value;
}

int require_dimension(const pt::ptree& node, const std::string& path) {
  const double v = require_number(node, path, "size");
  if (v < 0 || v != static_cast<int>(v)) {
    throw Error(ErrorCode::MalformedXml, "<" + path + "> must be a non-negative integer");
  }
  return static_cast<int>(v);
}

bool parse_flag(std::string_view text) {
  text = trim(text);
  return text == "1" || text == "true" || text == "True";
}

std::string stem_of(std::string_view filename) {
  return std::filesystem::path(std::string(filename)).stem().string();
}

void append_escaped(std::string& out, std::string_view text) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

AnnotationSet parse_voc_annotation(std::string_view xml_text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml_text)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.what());
  }
  const pt::ptree& root = require_child(tree, "annotation", "document");
  const std::string filename = require_text(root, "filename", "annotation");
  const pt::ptree& size = require_child(root, "size", "annotation");
  const int width = require_dimension(size, "width");
  const int height = require_dimension(size, "height");

  std::vector<ObjectInstance> objects;
  for (const auto& [tag, node] : root) {
    if (tag != "object") continue;
    const std::string where = "object " + std::to_string(objects.size());
    std::string name = require_text(node, "name", where);
    const pt::ptree& bnd = require_child(node, "bndbox", where);
    BoundingBox box(require_number(bnd, "xmin", where), require_number(bnd, "ymin", where),
                    require_number(bnd, "xmax", where), require_number(bnd, "ymax", where));
    const auto difficult = node.get_optional<std::string>("difficult");
    objects.emplace_back(std::move(name), box, difficult ? parse_flag(*difficult) : false);
  }
  return AnnotationSet(stem_of(filename), width, height, std::move(objects));
}

std::string serialize_voc_annotation(const AnnotationSet& ann, int depth) {
  std::string out;
  out += "<annotation>\n";
  out += "\t<filename>";
  append_escaped(out, ann.image_id() + ".png");
  out += "</filename>\n";
  out += "\t<size>\n";
  out += "\t\t<width>" + std::to_string(ann.width()) + "</width>\n";
  out += "\t\t<height>" + std::to_string(ann.height()) + "</height>\n";
  if (depth > 0) out += "\t\t<depth>" + std::to_string(depth) + "</depth>\n";
  out += "\t</size>\n";
  for (const ObjectInstance& obj : ann.objects()) {
    out += "\t<object>\n";
    out += "\t\t<name>";
    append_escaped(out, obj.class_label);
    out += "</name>\n";
    out += obj.difficult ? "\t\t<difficult>1</difficult>\n" : "\t\t<difficult>0</difficult>\n";
    out += "\t\t<bndbox>\n";
    const std::pair<const char*, double> coords[] = {
        {"xmin", obj.box.xmin()}, {"ymin", obj.box.ymin()},
        {"xmax", obj.box.xmax()}, {"ymax", obj.box.ymax()}};
    for (const auto& [tag, value] : coords) {
      out += "\t\t\t<";
      out += tag;
      out += '>';
      append_number(out, value);
      out += "</";
      out += tag;
      out += ">\n";
    }
    out += "\t\t</bndbox>\n";
    out += "\t</object>\n";
  }
  out += "</annotation>\n";
  return out;
}

}  // namespace thermadapt
