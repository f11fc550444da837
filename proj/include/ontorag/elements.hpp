#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ontorag/util.hpp"

namespace ontorag {

/// Axis-aligned box in the owning element's unit system.
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    /// Swaps corners so that x0 <= x1 and y0 <= y1.
    BBox normalized() const;
    bool contains(const BBox& inner) const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// The common portrait page, used when a document does not override its bounds.
inline constexpr BBox kDefaultPageBounds{0.0, 0.0, 612.0, 792.0};

enum class ElementKind { title, narrative_text, table, image, header, footer, other };

std::string_view to_string(ElementKind kind);
ElementKind element_kind_from_string(std::string_view name);

struct DocumentElement {
    std::string id;
    std::string doc_id;
    ElementKind kind = ElementKind::narrative_text;
    std::string text;
    int page = 1;
    BBox bbox;
    double units = 1.0;
};

/// Request for an external renderer to crop and read a table region.
struct CropRequest {
    std::string element_id;
    std::string doc_id;
    int page = 1;
    BBox padded_bbox;
    std::string context_note;
};

/// Rescales every coordinate by target_units / source_units.
BBox transform_coords(const BBox& bbox, double source_units, double target_units);

/// Grows the box by pad_h horizontally and pad_v vertically, clamped to the page.
BBox pad_region(const BBox& bbox, const BBox& page_bounds, double pad_h = 20.0,
                double pad_v = 100.0);

CropRequest extract_table_region(const DocumentElement& element, double target_units,
                                 const BBox& page_bounds = kDefaultPageBounds);

/// Reads an `elements.jsonl` file. Corners are normalized on ingest; ids must be unique
/// per document.
std::vector<DocumentElement> load_elements(const std::filesystem::path& path);
std::vector<DocumentElement> parse_elements(std::string_view jsonl);

/// Canonical line-delimited form of an element list.
std::string serialize_elements(std::span<const DocumentElement> elements);

/// Page bounds per document id, falling back to kDefaultPageBounds.
struct PageBoundsTable {
    std::map<std::string, BBox> per_document;
    BBox lookup(const std::string& doc_id) const;
};

json to_json(const BBox& b);
json to_json(const DocumentElement& e);
json to_json(const CropRequest& c);
BBox bbox_from_json(const json& j);

}  // namespace ontorag
