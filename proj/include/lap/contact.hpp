#pragma once

// Support relations between objects, relational bundles and gravity settling.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lap/actions.hpp"
#include "lap/error.hpp"
#include "lap/metrics.hpp"
#include "lap/scene.hpp"

namespace lap {

struct Relation {
  enum class Kind { Floor, On, Free };
  Kind kind = Kind::Floor;
  int supporter = -1; // detection id, only for On

  static Relation floor() { return {Kind::Floor, -1}; }
  static Relation on(int id) { return {Kind::On, id}; }
  static Relation free() { return {Kind::Free, -1}; }

  bool operator==(const Relation&) const = default;
};

inline std::string to_string(const Relation& r) {
  switch (r.kind) {
    case Relation::Kind::Floor: return "FLOOR";
    case Relation::Kind::On: return "ON " + std::to_string(r.supporter);
    case Relation::Kind::Free: return "FREE";
  }
  return "?";
}

/// Relation per detection id.
using ContactGraph = std::map<int, Relation>;

struct ContactEntry {
  int id = 0;
  std::string class_name;
  Relation relation;
};

struct ContactParse {
  std::vector<ContactEntry> entries;
  std::vector<Diagnostic> diagnostics;
};

/// Reads "<CONTACT> id: N class: C relation: FLOOR | ON [obj_]M | FREE </CONTACT>"
/// lines. Malformed lines are skipped with a diagnostic.
inline ContactParse parse_contact(std::string_view text) {
  static const std::regex line_re(
      R"(^\s*<CONTACT>\s*id:\s*(?:obj_)?(\d+)\s+class:\s*(.*?)\s+relation:\s*(FLOOR|FREE|ON\s+(?:obj_)?(\d+))\s*</CONTACT>\s*$)",
      std::regex::icase);
  ContactParse out;
  std::istringstream in{std::string(text)};
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) {
      out.diagnostics.push_back({no, line, "malformed CONTACT line"});
      continue;
    }
    ContactEntry e;
    e.id = std::stoi(m[1].str());
    e.class_name = m[2].str();
    std::string rel = m[3].str();
    std::transform(rel.begin(), rel.end(), rel.begin(), [](unsigned char c) { return std::toupper(c); });
    if (rel == "FLOOR") e.relation = Relation::floor();
    else if (rel == "FREE") e.relation = Relation::free();
    else e.relation = Relation::on(std::stoi(m[4].str()));
    out.entries.push_back(e);
  }
  return out;
}

struct ContactResolution {
  ContactGraph graph;
  std::vector<std::string> diagnostics;
};

namespace detail {

/// Demotes the lowest id of every ON cycle to FLOOR.
inline void break_cycles(ContactGraph& g, std::vector<std::string>& diags) {
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [start, rel] : g) {
      std::vector<int> path{start};
      std::set<int> seen{start};
      int cur = start;
      while (true) {
        const auto it = g.find(cur);
        if (it == g.end() || it->second.kind != Relation::Kind::On) break;
        const int next = it->second.supporter;
        if (seen.count(next)) {
          const auto from = std::find(path.begin(), path.end(), next);
          if (from != path.end()) {
            const int low = *std::min_element(from, path.end());
            g[low] = Relation::floor();
            diags.push_back("cycle detected; obj " + std::to_string(low) + " demoted to FLOOR");
            changed = true;
          }
          break;
        }
        seen.insert(next);
        path.push_back(next);
        cur = next;
      }
      if (changed) break;
    }
  }
}

} // namespace detail

/// Builds a graph covering exactly the layout's ids. Unknown and duplicate ids
/// are reported and ignored, missing ids default to FLOOR, ON edges to unknown
/// or self supporters become FLOOR, and cycles are broken.
inline ContactResolution resolve_contact(const ContactParse& parsed, const GridLayout& layout) {
  ContactResolution out;
  std::set<int> ids;
  for (const auto& o : layout.objects) ids.insert(o.id);
  for (const auto& e : parsed.entries) {
    if (!ids.count(e.id)) {
      out.diagnostics.push_back("unknown id " + std::to_string(e.id));
      continue;
    }
    if (out.graph.count(e.id)) {
      out.diagnostics.push_back("duplicate id " + std::to_string(e.id));
      continue;
    }
    Relation r = e.relation;
    if (r.kind == Relation::Kind::On && (!ids.count(r.supporter) || r.supporter == e.id)) {
      out.diagnostics.push_back("obj " + std::to_string(e.id) + " has invalid supporter " +
                                std::to_string(r.supporter) + "; using FLOOR");
      r = Relation::floor();
    }
    out.graph[e.id] = r;
  }
  for (int id : ids)
    if (!out.graph.count(id)) {
      out.diagnostics.push_back("missing relation for obj " + std::to_string(id) + "; using FLOOR");
      out.graph[id] = Relation::floor();
    }
  detail::break_cycles(out.graph, out.diagnostics);
  return out;
}

inline bool has_cycle(const ContactGraph& g) {
  ContactGraph copy = g;
  std::vector<std::string> diags;
  detail::break_cycles(copy, diags);
  return !diags.empty();
}

/// Relations read off a layout: FLOOR within one unit of the ground, ON the
/// best-overlapping supporter under the support rule, FREE otherwise.
inline ContactGraph infer_contact_graph(const GridLayout& layout) {
  ContactGraph g;
  const int nt = layout.config.n_theta;
  for (const auto& a : layout.objects) {
    if (a.pos[1] <= 1) {
      g[a.id] = Relation::floor();
      continue;
    }
    std::optional<int> best;
    double best_overlap = 0.0;
    for (const auto& b : layout.objects) {
      if (b.id == a.id || std::abs(b.top() - a.pos[1]) > 1) continue;
      const double f = footprint_overlap_fraction(a, b, nt);
      if (f >= 0.5 && (f > best_overlap || (f == best_overlap && best && b.id < *best))) {
        best = b.id;
        best_overlap = f;
      }
    }
    g[a.id] = best ? Relation::on(*best) : Relation::free();
  }
  return g;
}

inline std::string format_contact(const ContactGraph& g, const GridLayout& layout) {
  std::string s;
  for (const auto& o : layout.objects) {
    const auto it = g.find(o.id);
    const Relation r = it == g.end() ? Relation::floor() : it->second;
    s += "<CONTACT> id: " + std::to_string(o.id) + " class: " + o.class_name + " relation: " + to_string(r) +
         " </CONTACT>\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Bundles

struct RelationalBundle {
  int root = 0;
  bool anchored = false;    // rooted at a FREE object: the root never moves
  std::vector<int> members; // root first, every supporter before its supportees
};

struct BundleSet {
  std::vector<RelationalBundle> bundles;
  std::vector<int> free; // FREE objects without supportees
};

inline BundleSet build_bundles(const ContactGraph& graph, const GridLayout& layout) {
  if (has_cycle(graph)) throw Error(ErrorCode::CyclicSupport, "contact graph has a cycle");
  std::map<int, std::vector<int>> children;
  for (const auto& [id, r] : graph)
    if (r.kind == Relation::Kind::On) children[r.supporter].push_back(id);

  BundleSet out;
  for (const auto& o : layout.objects) {
    const auto it = graph.find(o.id);
    const Relation r = it == graph.end() ? Relation::floor() : it->second;
    if (r.kind == Relation::Kind::On) continue;
    RelationalBundle b;
    b.root = o.id;
    b.anchored = r.kind == Relation::Kind::Free;
    b.members.push_back(o.id);
    for (std::size_t k = 0; k < b.members.size(); ++k) {
      const auto c = children.find(b.members[k]);
      if (c != children.end()) b.members.insert(b.members.end(), c->second.begin(), c->second.end());
    }
    if (b.anchored && b.members.size() == 1) out.free.push_back(o.id);
    else out.bundles.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Settling

namespace detail {

inline std::map<int, std::size_t> index_by_id(const GridLayout& layout) {
  std::map<int, std::size_t> out;
  for (std::size_t i = 0; i < layout.objects.size(); ++i) out[layout.objects[i].id] = i;
  return out;
}

inline bool footprints_overlap(const GridBox& a, const GridBox& b, int nt) {
  return convex_intersection_area(footprint(a, nt), footprint(b, nt)) > 1e-9;
}

} // namespace detail

/// Drops every FLOOR bundle, lowest first, as a rigid body onto the ground or
/// onto already settled objects. Each bundle is first collapsed so members sit
/// on their supporters' tops. A settled object is an obstacle for a member when
/// their footprints overlap and it lies below the member: its top is within
/// `clearance` of the member's bottom, or its bottom is not above it. The
/// bundle then moves by the one vertical shift that leaves every member on or
/// above its obstacles with at least one in contact. Objects in FREE-rooted
/// bundles keep the root fixed. XZ coordinates never change.
inline GridLayout settle(const GridLayout& layout, const ContactGraph& graph, const BundleSet& bs, int clearance = 1) {
  GridLayout out = layout;
  const auto idx = detail::index_by_id(out);
  const int nt = out.config.n_theta;
  auto obj = [&](int id) -> GridBox& { return out.objects[idx.at(id)]; };

  for (const auto& b : bs.bundles)
    for (std::size_t k = 1; k < b.members.size(); ++k) {
      GridBox& m = obj(b.members[k]);
      m.pos[1] = obj(graph.at(m.id).supporter).top();
    }

  std::vector<int> settled(bs.free.begin(), bs.free.end());
  std::vector<const RelationalBundle*> falling;
  for (const auto& b : bs.bundles) {
    if (b.anchored) settled.insert(settled.end(), b.members.begin(), b.members.end());
    else falling.push_back(&b);
  }
  std::stable_sort(falling.begin(), falling.end(), [&](const RelationalBundle* a, const RelationalBundle* b) {
    const int ya = obj(a->root).pos[1];
    const int yb = obj(b->root).pos[1];
    return ya != yb ? ya < yb : a->root < b->root;
  });

  for (const RelationalBundle* b : falling) {
    int shift = std::numeric_limits<int>::min();
    for (int mid : b->members) {
      const GridBox& m = obj(mid);
      int rest = 0;
      for (int sid : settled) {
        const GridBox& s = obj(sid);
        const bool below = s.top() <= m.pos[1] + clearance || s.pos[1] <= m.pos[1];
        if (below && s.top() > rest && detail::footprints_overlap(m, s, nt)) rest = s.top();
      }
      shift = std::max(shift, rest - m.pos[1]);
    }
    for (int mid : b->members) obj(mid).pos[1] += shift;
    settled.insert(settled.end(), b->members.begin(), b->members.end());
  }
  return out;
}

inline GridLayout settle(const GridLayout& layout, const ContactGraph& graph, int clearance = 1) {
  return settle(layout, graph, build_bundles(graph, layout), clearance);
}

/// Ids of FREE objects, which settling and the support metric leave alone.
inline std::set<int> free_ids(const ContactGraph& g) {
  std::set<int> out;
  for (const auto& [id, r] : g)
    if (r.kind == Relation::Kind::Free) out.insert(id);
  return out;
}

// ---------------------------------------------------------------------------
// Mesh export

/// Wavefront OBJ with one 8-vertex, 12-triangle box per object, in canonical
/// meters (y up).
inline std::string export_box_mesh(const GridLayout& layout) {
  std::ostringstream os;
  os.precision(9);
  const auto boxes = undiscretize(layout.objects, layout.config);
  std::size_t base = 1;
  static constexpr int faces[12][3] = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                                       {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const CanonicalBox& b = boxes[i];
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const Vec3 ax(c, 0.0, -s), az(-s, 0.0, -c);
    os << "o obj_" << i << "_" << b.class_name << "\n";
    for (int v = 0; v < 8; ++v) {
      const double sx = (v & 1) ? 0.5 : -0.5;
      const double y = (v & 2) ? b.size.y() : 0.0;
      const double sz = (v & 4) ? 0.5 : -0.5;
      const Vec3 p = Vec3(b.pos.x(), b.pos.y() + y, b.pos.z()) + sx * b.size.x() * ax + sz * b.size.z() * az;
      os << "v " << p.x() << " " << p.y() << " " << p.z() << "\n";
    }
    for (const auto& f : faces) os << "f " << base + f[0] << " " << base + f[1] << " " << base + f[2] << "\n";
    base += 8;
  }
  return os.str();
}

} // namespace lap
