#include "nucgrade/core_types.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace nucgrade {

const char* class_name(int code) {
  switch (code) {
    case 0: return "background";
    case 1: return "grade1";
    case 2: return "grade2";
    case 3: return "grade3";
    case 4: return "endothelial";
    default: return "invalid";
  }
}

std::int32_t InstanceMap::max_id() const {
  std::int32_t m = 0;
  for (std::int32_t id : ids.v) m = std::max(m, id);
  return m;
}

Plane<std::int32_t> label_same_value_components_4(const Plane<std::int32_t>& values, int* count) {
  const int h = values.rows, w = values.cols;
  Plane<std::int32_t> labels(h, w, 0);
  std::vector<std::pair<int, int>> stack;
  int next = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (values(r, c) == 0 || labels(r, c) != 0) continue;
      const std::int32_t value = values(r, c);
      ++next;
      labels(r, c) = next;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [pr, pc] = stack.back();
        stack.pop_back();
        constexpr int dr[4] = {-1, 1, 0, 0};
        constexpr int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int nr = pr + dr[k], nc = pc + dc[k];
          if (!values.in_bounds(nr, nc)) continue;
          if (values(nr, nc) != value || labels(nr, nc) != 0) continue;
          labels(nr, nc) = next;
          stack.push_back({nr, nc});
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

InstanceMap relabel_dense(const InstanceMap& m) {
  InstanceMap out(m.height(), m.width());
  std::map<std::int32_t, std::int32_t> remap;
  std::int32_t next = 0;
  for (std::size_t i = 0; i < m.ids.v.size(); ++i) {
    std::int32_t id = m.ids.v[i];
    if (id == 0) continue;
    auto it = remap.find(id);
    if (it == remap.end()) it = remap.insert({id, ++next}).first;
    out.ids.v[i] = it->second;
  }
  return out;
}

std::vector<std::string> validate_sample(const LabeledSample& sample) {
  std::vector<std::string> violations;
  auto report = [&](const std::string& s) { violations.push_back(s); };
  std::ostringstream os;

  const int h = sample.image.height, w = sample.image.width;
  if (sample.instances.height() != h || sample.instances.width() != w ||
      sample.classes.height() != h || sample.classes.width() != w) {
    os << "shape mismatch: image " << h << "x" << w << ", instances "
       << sample.instances.height() << "x" << sample.instances.width() << ", classes "
       << sample.classes.height() << "x" << sample.classes.width();
    report(os.str());
    return violations;  // pixelwise checks below assume matching shapes
  }
  if (h <= 0 || w <= 0) {
    report("empty image");
    return violations;
  }
  if (h % kPatchDivisor != 0 || w % kPatchDivisor != 0) {
    os.str("");
    os << "image dimensions " << h << "x" << w << " not divisible by " << kPatchDivisor;
    report(os.str());
  }

  const auto& ids = sample.instances.ids;
  const auto& classes = sample.classes.classes;
  const std::int32_t max_id = sample.instances.max_id();

  for (std::int32_t id : ids.v) {
    if (id < 0) {
      report("negative instance id");
      return violations;
    }
  }

  // dense ids 1..max
  std::vector<char> present(std::size_t(max_id) + 1, 0);
  for (std::int32_t id : ids.v) present[std::size_t(id)] = 1;
  for (std::int32_t id = 1; id <= max_id; ++id) {
    if (!present[std::size_t(id)]) {
      os.str("");
      os << "non-dense instance ids: id " << id << " missing (max id " << max_id << ")";
      report(os.str());
    }
  }

  // 4-connectivity: each id must form exactly one same-value component
  int n_components = 0;
  Plane<std::int32_t> comp = label_same_value_components_4(ids, &n_components);
  std::vector<std::set<std::int32_t>> comps_of_id(std::size_t(max_id) + 1);
  for (std::size_t i = 0; i < ids.v.size(); ++i) {
    if (ids.v[i] > 0) comps_of_id[std::size_t(ids.v[i])].insert(comp.v[i]);
  }
  for (std::int32_t id = 1; id <= max_id; ++id) {
    if (comps_of_id[std::size_t(id)].size() > 1) {
      os.str("");
      os << "instance " << id << " is not 4-connected (" << comps_of_id[std::size_t(id)].size()
         << " components)";
      report(os.str());
    }
  }

  // class/instance consistency and per-instance class uniformity
  std::vector<int> instance_class(std::size_t(max_id) + 1, -1);
  std::set<std::int32_t> mixed_reported;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t id = ids(r, c);
      const int cls = classes(r, c);
      if (cls >= kNumClasses) {
        os.str("");
        os << "class code out of range at (" << r << "," << c << "): " << cls;
        report(os.str());
        continue;
      }
      if ((cls == 0) != (id == 0)) {
        os.str("");
        os << "class/instance mismatch at (" << r << "," << c << "): class=" << cls
           << " id=" << id;
        report(os.str());
        continue;
      }
      if (id > 0) {
        int& known = instance_class[std::size_t(id)];
        if (known < 0) {
          known = cls;
        } else if (known != cls && !mixed_reported.count(id)) {
          mixed_reported.insert(id);
          os.str("");
          os << "instance " << id << " has multiple class codes (" << known << " and " << cls
             << ")";
          report(os.str());
        }
      }
    }
  }
  return violations;
}

}  // namespace nucgrade
