#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "affinity/idset.hpp"
#include "affinity/ingest.hpp"
#include "affinity/metrics.hpp"
#include "affinity/pipeline.hpp"
#include "affinity/report.hpp"
#include "affinity/synth.hpp"

namespace py = pybind11;
using namespace affinity;

namespace {

Level level_arg(const std::string& s) {
  auto l = parse_level(s);
  if (!l) throw py::value_error("level must be 'sport', 'state' or 'team'");
  return *l;
}

py::dict key_dict(const GroupKey& k) {
  py::dict d;
  d["league"] = std::string(to_string(k.league));
  d["state"] = k.state.empty() ? py::object(py::none()) : py::str(k.state);
  d["team"] = k.team.empty() ? py::object(py::none()) : py::str(k.team);
  return d;
}

py::object optional_list(const std::vector<double>& v, bool defined) {
  return defined ? py::object(py::cast(v)) : py::object(py::none());
}

PipelineOptions pipeline_options(unsigned threads) {
  PipelineOptions o;
  o.threads = threads;
  return o;
}

Snapshot load_dataset(const std::filesystem::path& manifest, unsigned threads) {
  auto reg = std::make_shared<const Registry>(load_registry_file(manifest));
  IngestOptions o;
  o.threads = threads;
  return load_snapshot(reg, manifest.parent_path(), o).snapshot;
}

}  // namespace

PYBIND11_MODULE(_affinity, m) {
  m.doc() = "Sports fandom and political affinity analysis";

  py::register_exception<RegistryError>(m, "RegistryError", PyExc_ValueError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);
  py::register_exception<PipelineError>(m, "PipelineError", PyExc_ValueError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ValueError);
  py::register_exception<IdsFormatError>(m, "IdsFormatError", PyExc_ValueError);
  py::register_exception<SynthConfigError>(m, "SynthConfigError", PyExc_ValueError);

  py::class_<IdSet>(m, "IdSet")
      .def(py::init<>())
      .def(py::init([](std::vector<UserId> ids) { return IdSet::build(std::move(ids)); }), py::arg("ids"))
      .def("__len__", &IdSet::size)
      .def("__contains__", &IdSet::contains)
      .def("__eq__", [](const IdSet& a, const IdSet& b) { return a == b; })
      .def("__and__", &intersect)
      .def("__or__", &unite)
      .def("__sub__", &difference)
      .def("__iter__", [](const IdSet& s) { return py::make_iterator(s.begin(), s.end()); }, py::keep_alive<0, 1>())
      .def("to_list", &IdSet::to_vector)
      .def("intersection_size", &intersection_size)
      .def("to_bytes", [](const IdSet& s) {
        auto b = encode_ids1(s);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("from_bytes", [](py::bytes data) {
        std::string_view v = data;
        return decode_ids1(std::as_bytes(std::span(v.data(), v.size())));
      })
      .def("__repr__", [](const IdSet& s) { return "IdSet(size=" + std::to_string(s.size()) + ")"; });

  m.def("unite_all", [](const std::vector<const IdSet*>& sets) { return unite_all(sets); });

  m.def(
      "congressional_weight",
      [](std::uint32_t alpha, std::uint32_t beta) {
        auto w = congressional_weight({alpha, beta});
        return std::pair(w.dem, w.rep);
      },
      py::arg("alpha"), py::arg("beta"), "Democrat and Republican weights of one user.");
  m.def(
      "devotedness",
      [](std::vector<std::uint8_t> follows) { return devotedness(CandidateFollowVector{std::move(follows)}); },
      py::arg("follows"), "1/n for each followed candidate, 0 elsewhere.");
  m.def(
      "cds_contribution",
      [](std::uint32_t alpha, std::uint32_t beta, std::vector<std::uint8_t> follows,
         const std::vector<std::string>& parties) {
        std::vector<Party> ps;
        for (const auto& p : parties) {
          auto party = parse_party(p);
          if (!party) throw py::value_error("unknown party: " + p);
          ps.push_back(*party);
        }
        return cds_contribution({alpha, beta}, CandidateFollowVector{std::move(follows)}, ps).values;
      },
      py::arg("alpha"), py::arg("beta"), py::arg("follows"), py::arg("parties"));

  py::class_<Snapshot>(m, "Snapshot")
      .def_property_readonly("handles",
                             [](const Snapshot& s) {
                               std::vector<std::string> out;
                               for (const auto& [h, _] : s.sets()) out.push_back(h);
                               return out;
                             })
      .def_property_readonly("candidates",
                             [](const Snapshot& s) {
                               std::vector<std::string> out;
                               for (const Entity* e : s.registry().candidates()) out.push_back(e->handle);
                               return out;
                             })
      .def_property_readonly("states", [](const Snapshot& s) { return s.registry().states(); })
      .def("followers", [](const Snapshot& s, const std::string& h) { return s.at(h); }, py::arg("handle"))
      .def("__eq__", [](const Snapshot& a, const Snapshot& b) { return a == b; });

  m.def("load_dataset", &load_dataset, py::arg("manifest"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>(), "Validate and load a manifest and its follower files.");

  m.def(
      "generate",
      [](const std::string& config_json, std::optional<std::uint64_t> seed, unsigned threads) {
        auto config = parse_synth_config(config_json);
        if (seed) config.seed = *seed;
        config.threads = threads;
        py::gil_scoped_release release;
        return generate(config).snapshot;
      },
      py::arg("config_json"), py::arg("seed") = py::none(), py::arg("threads") = 1);
  m.def(
      "write_dataset",
      [](const std::string& config_json, const std::filesystem::path& dir, std::optional<std::uint64_t> seed) {
        auto config = parse_synth_config(config_json);
        if (seed) config.seed = *seed;
        py::gil_scoped_release release;
        return write_dataset(config, dir);
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("seed") = py::none());

  m.def(
      "exclusive_fans",
      [](const Snapshot& s, const std::string& league) {
        auto l = parse_league(league);
        if (!l) throw py::value_error("league must be 'NBA' or 'NFL'");
        return exclusive_fans(s, *l);
      },
      py::arg("snapshot"), py::arg("league"));

  m.def(
      "run_cdr",
      [](const Snapshot& s, const std::string& level, unsigned threads) {
        CdrTable t;
        {
          py::gil_scoped_release release;
          t = run_cdr(s, level_arg(level), pipeline_options(threads));
        }
        py::list rows;
        for (const auto& r : t.rows) {
          auto d = key_dict(r.key);
          d["cohort_size"] = r.cohort_size;
          d["cds"] = r.cds;
          d["cdr"] = optional_list(r.cdr, r.defined());
          rows.append(d);
        }
        py::dict out;
        out["level"] = level;
        out["candidates"] = t.candidates;
        out["rows"] = rows;
        return out;
      },
      py::arg("snapshot"), py::arg("level") = "state", py::arg("threads") = 1);

  m.def(
      "ratio_table",
      [](const Snapshot& s, const std::string& level, unsigned threads) {
        std::vector<RatioRow> rows;
        {
          py::gil_scoped_release release;
          rows = ratio_table(s, level_arg(level), pipeline_options(threads));
        }
        py::list out;
        for (const auto& r : rows) {
          auto d = key_dict(r.key);
          d["fans"] = r.fans;
          d["overlaps"] = r.overlaps;
          d["ratios"] = optional_list(r.ratios, r.defined());
          out.append(d);
        }
        return out;
      },
      py::arg("snapshot"), py::arg("level") = "state", py::arg("threads") = 1);

  m.def(
      "senator_breakdown_table",
      [](const Snapshot& s, const std::string& level, unsigned threads) {
        std::vector<SenatorBreakdown> rows;
        {
          py::gil_scoped_release release;
          rows = senator_breakdown_table(s, level_arg(level), pipeline_options(threads));
        }
        py::list out;
        for (const auto& r : rows) {
          auto d = key_dict(r.key);
          d["senator_followers"] = r.senator_followers;
          d["only_democrat_count"] = r.only_democrat_count;
          d["only_republican_count"] = r.only_republican_count;
          d["both_count"] = r.both_count;
          if (r.defined()) {
            d["only_democrat"] = r.only_democrat;
            d["only_republican"] = r.only_republican;
            d["both"] = r.both;
          }
          out.append(d);
        }
        return out;
      },
      py::arg("snapshot"), py::arg("level") = "sport", py::arg("threads") = 1);

  m.def(
      "write_report",
      [](const Snapshot& s, const std::filesystem::path& out_dir, const std::string& level,
         const std::string& format, unsigned threads) {
        ReportOptions o;
        o.level = level_arg(level);
        auto f = parse_report_format(format);
        if (!f) throw py::value_error("format must be 'csv' or 'text'");
        o.format = *f;
        o.threads = threads;
        py::gil_scoped_release release;
        return write_report(s, out_dir, o).files;
      },
      py::arg("snapshot"), py::arg("out_dir"), py::arg("level") = "state", py::arg("format") = "csv",
      py::arg("threads") = 1);
}
