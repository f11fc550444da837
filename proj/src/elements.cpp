#include "ontorag/elements.hpp"

#include "ontorag/errors.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace ontorag {

BBox BBox::normalized() const {
    BBox b = *this;
    if (b.x0 > b.x1) std::swap(b.x0, b.x1);
    if (b.y0 > b.y1) std::swap(b.y0, b.y1);
    return b;
}

bool BBox::contains(const BBox& inner) const {
    return inner.x0 >= x0 && inner.y0 >= y0 && inner.x1 <= x1 && inner.y1 <= y1;
}

std::string_view to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::title: return "title";
        case ElementKind::narrative_text: return "narrative_text";
        case ElementKind::table: return "table";
        case ElementKind::image: return "image";
        case ElementKind::header: return "header";
        case ElementKind::footer: return "footer";
        case ElementKind::other: return "other";
    }
    return "other";
}

ElementKind element_kind_from_string(std::string_view name) {
    static const std::pair<std::string_view, ElementKind> table[] = {
        {"title", ElementKind::title},   {"narrative_text", ElementKind::narrative_text},
        {"table", ElementKind::table},   {"image", ElementKind::image},
        {"header", ElementKind::header}, {"footer", ElementKind::footer},
        {"other", ElementKind::other},
    };
    for (const auto& [key, kind] : table) {
        if (key == name) return kind;
    }
    throw InvalidArgument("unknown element kind '" + std::string(name) + "'");
}

BBox transform_coords(const BBox& bbox, double source_units, double target_units) {
    if (!(source_units > 0.0) || !(target_units > 0.0)) {
        throw InvalidArgument("unit scales must be positive");
    }
    if (source_units == target_units) {
        return bbox;
    }
    auto scale = [&](double c) { return c * target_units / source_units; };
    return {scale(bbox.x0), scale(bbox.y0), scale(bbox.x1), scale(bbox.y1)};
}

BBox pad_region(const BBox& bbox, const BBox& page_bounds, double pad_h, double pad_v) {
    BBox out{bbox.x0 - pad_h, bbox.y0 - pad_v, bbox.x1 + pad_h, bbox.y1 + pad_v};
    out.x0 = std::clamp(out.x0, page_bounds.x0, page_bounds.x1);
    out.x1 = std::clamp(out.x1, page_bounds.x0, page_bounds.x1);
    out.y0 = std::clamp(out.y0, page_bounds.y0, page_bounds.y1);
    out.y1 = std::clamp(out.y1, page_bounds.y0, page_bounds.y1);
    return out;
}

CropRequest extract_table_region(const DocumentElement& element, double target_units,
                                 const BBox& page_bounds) {
    if (element.kind != ElementKind::table) {
        throw InvalidArgument("element '" + element.id + "' is " +
                              std::string(to_string(element.kind)) + ", not a table");
    }
    const BBox scaled = transform_coords(element.bbox, element.units, target_units);
    CropRequest req;
    req.element_id = element.id;
    req.doc_id = element.doc_id;
    req.page = element.page;
    req.padded_bbox = pad_region(scaled, page_bounds);
    req.context_note = "table region with surrounding title/footnote margin";
    return req;
}

json to_json(const BBox& b) { return json{{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}}; }

BBox bbox_from_json(const json& j) {
    return {j.at("x0").get<double>(), j.at("y0").get<double>(), j.at("x1").get<double>(),
            j.at("y1").get<double>()};
}

json to_json(const DocumentElement& e) {
    return json{{"id", e.id},     {"doc_id", e.doc_id}, {"kind", std::string(to_string(e.kind))},
                {"text", e.text}, {"page", e.page},     {"bbox", to_json(e.bbox)},
                {"units", e.units}};
}

json to_json(const CropRequest& c) {
    return json{{"element_id", c.element_id},
                {"doc_id", c.doc_id},
                {"page", c.page},
                {"padded_bbox", to_json(c.padded_bbox)},
                {"context_note", c.context_note}};
}

namespace {

DocumentElement element_from_json(const json& j, std::size_t line) {
    DocumentElement e;
    try {
        e.id = j.at("id").get<std::string>();
        e.doc_id = j.at("doc_id").get<std::string>();
        e.kind = element_kind_from_string(j.at("kind").get<std::string>());
        e.text = j.value("text", std::string{});
        e.page = j.at("page").get<int>();
        e.bbox = bbox_from_json(j.at("bbox")).normalized();
        e.units = j.at("units").get<double>();
    } catch (const json::exception& ex) {
        throw ParseError(line, ex.what());
    } catch (const InvalidArgument& ex) {
        throw ParseError(line, ex.what());
    }
    if (e.id.empty()) throw ParseError(line, "empty element id");
    if (e.page < 1) throw ParseError(line, "page must be >= 1");
    if (!(e.units > 0.0)) throw ParseError(line, "units must be positive");
    return e;
}

}  // namespace

std::vector<DocumentElement> parse_elements(std::string_view jsonl) {
    std::vector<DocumentElement> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        ++line;
        std::string_view text = jsonl.substr(pos, end - pos);
        pos = end + 1;
        if (trim(text).empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& ex) {
            throw ParseError(line, ex.what());
        }
        if (!j.is_object()) throw ParseError(line, "expected a JSON object");
        DocumentElement e = element_from_json(j, line);
        if (!seen.emplace(e.doc_id, e.id).second) {
            throw ValidationError("line " + std::to_string(line) + ": duplicate element id '" +
                                  e.id + "' in document '" + e.doc_id + "'");
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<DocumentElement> load_elements(const std::filesystem::path& path) {
    return parse_elements(read_file(path));
}

std::string serialize_elements(std::span<const DocumentElement> elements) {
    std::string out;
    for (const auto& e : elements) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

BBox PageBoundsTable::lookup(const std::string& doc_id) const {
    auto it = per_document.find(doc_id);
    return it == per_document.end() ? kDefaultPageBounds : it->second;
}

}  // namespace ontorag
