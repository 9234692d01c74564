#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "dicoderma/anonymize.hpp"
#include "dicoderma/dicom.hpp"
#include "dicoderma/error.hpp"
#include "dicoderma/jpeg.hpp"
#include "dicoderma/metadata.hpp"
#include "dicoderma/search.hpp"
#include "dicoderma/uid.hpp"

namespace py = pybind11;
using namespace dicoderma;

namespace {

dicoderma::ByteView view(const py::bytes& data, std::string& storage) {
  storage = data;
  return as_bytes(storage);
}

py::bytes to_py(const Bytes& data) {
  return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
}

// Metadata crosses the boundary as the canonical JSON object (a dict keyed by
// DICOM keywords plus "dicoderma").
ClinicalMetadata from_dict(const py::dict& d) {
  const std::string text = py::module_::import("json").attr("dumps")(d).cast<std::string>();
  auto doc = nlohmann::json::parse(text);
  if (!doc.contains("dicoderma")) doc["dicoderma"] = std::string(kSchemaVersion);
  return decode_metadata(doc.dump());
}

py::dict to_dict(const ClinicalMetadata& m) {
  return py::module_::import("json").attr("loads")(encode_metadata(m)).cast<py::dict>();
}

py::dict descriptor_dict(const ImageDescriptor& d) {
  py::dict out;
  out["rows"] = d.rows;
  out["columns"] = d.columns;
  out["components"] = d.components;
  out["baseline"] = d.baseline;
  out["bits_per_sample"] = d.bits_per_sample;
  return out;
}

py::list issues_list(const std::vector<ValidationIssue>& issues) {
  py::list out;
  for (const auto& i : issues) {
    py::dict item;
    item["field"] = i.field;
    item["rule"] = i.rule;
    item["message"] = i.message;
    out.append(item);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Clinical tags in JPEG EXIF UserComment, with DICOM Secondary Capture conversion";

  static py::handle error_type =
      py::exception<Error>(m, "DicodermaError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidMetadataError& e) {
      py::tuple args = py::make_tuple(std::string(to_string(e.code())), e.what(), issues_list(e.issues()));
      PyErr_SetObject(error_type.ptr(), args.ptr());
    } catch (const Error& e) {
      py::tuple args = py::make_tuple(std::string(to_string(e.code())), e.what(), py::list());
      PyErr_SetObject(error_type.ptr(), args.ptr());
    }
  });

  m.def("image_descriptor", [](const py::bytes& data) {
    std::string storage;
    return descriptor_dict(parse_jpeg(view(data, storage)).frame);
  }, "Frame header fields of a JPEG file.");

  m.def("roundtrip_jpeg", [](const py::bytes& data) {
    std::string storage;
    return to_py(serialize_jpeg(parse_jpeg(view(data, storage))));
  }, "Parse and re-serialize a JPEG at the segment level.");

  m.def("scan_data", [](const py::bytes& data) {
    std::string storage;
    return to_py(parse_jpeg(view(data, storage)).scan_data);
  }, "Bytes from the first SOS marker to the end of the file.");

  m.def("read_user_comment", [](const py::bytes& data) {
    std::string storage;
    return read_user_comment(parse_jpeg(view(data, storage)));
  });

  m.def("write_user_comment", [](const py::bytes& data, const std::string& comment) {
    std::string storage;
    return to_py(write_user_comment(parse_jpeg(view(data, storage)), comment));
  });

  m.def("encode_metadata", [](const py::dict& d) { return encode_metadata(from_dict(d)); });
  m.def("decode_metadata", [](const std::string& text) { return to_dict(decode_metadata(text)); });
  m.def("detect", [](std::optional<std::string> text) { return detect(text); }, py::arg("text").none(true));

  m.def("tag", [](const py::bytes& data, const py::dict& d) {
    std::string storage;
    return to_py(write_user_comment(parse_jpeg(view(data, storage)), encode_metadata(from_dict(d))));
  }, "Write metadata into a JPEG's UserComment and return the new file bytes.");

  m.def("read_tags", [](const py::bytes& data) -> std::optional<py::dict> {
    std::string storage;
    const auto comment = read_user_comment(parse_jpeg(view(data, storage)));
    if (!detect(comment)) return std::nullopt;
    return to_dict(decode_metadata(*comment));
  });

  m.def("pseudonym", &pseudonym);

  m.def("anonymize",
        [](const py::dict& d, const std::string& secret, bool drop_name, bool pseudonymize_id,
           const std::string& dates, std::optional<std::uint64_t> seed) {
          AnonymizationPolicy policy{drop_name, pseudonymize_id,
                                     dates == "year-only" ? DateHandling::YearOnly
                                     : dates == "drop"    ? DateHandling::Drop
                                                          : DateHandling::Keep,
                                     secret};
          Anonymizer anonymizer(policy, seed ? UidContext::seeded(*seed) : UidContext::random());
          return to_dict(anonymizer.apply(from_dict(d)));
        },
        py::arg("metadata"), py::arg("secret") = "", py::arg("drop_name") = true,
        py::arg("pseudonymize_id") = true, py::arg("dates") = "keep", py::arg("seed") = py::none());

  m.def("make_uid", [](const std::string& root, py::int_ value) {
    const auto low = py::int_(value.attr("__and__")(py::int_(0xFFFFFFFFFFFFFFFFull))).cast<std::uint64_t>();
    const auto high = py::int_(value.attr("__rshift__")(64)).cast<std::uint64_t>();
    return make_uid(root, (static_cast<Uint128>(high) << 64) | low);
  });

  m.def("convert",
        [](const py::bytes& data, std::optional<py::dict> metadata, const std::string& uid_root,
           std::optional<std::uint64_t> seed) {
          std::string storage;
          const ByteView bytes = view(data, storage);
          ClinicalMetadata md;
          if (metadata) {
            md = from_dict(*metadata);
          } else {
            const auto comment = read_user_comment(parse_jpeg(bytes));
            if (detect(comment)) md = decode_metadata(*comment);
          }
          UidContext ctx = seed ? UidContext::seeded(*seed, uid_root) : UidContext::random(uid_root);
          const auto conversion = dicom::convert_jpeg(bytes, md, ctx);
          return py::make_tuple(to_py(conversion.file), conversion.sop_instance_uid);
        },
        py::arg("jpeg"), py::arg("metadata") = py::none(), py::arg("uid_root") = std::string(kDefaultUidRoot),
        py::arg("seed") = py::none(),
        "Part-10 bytes and SOPInstanceUID; metadata defaults to the tags stored in the file.");

  m.def("search",
        [](const std::filesystem::path& root, const std::vector<std::tuple<std::string, std::string, std::string>>& predicates,
           bool case_sensitive) {
          SearchQuery q;
          q.case_sensitive = case_sensitive;
          for (const auto& [field_name, kind, value] : predicates) {
            const auto field = field_from_name(field_name);
            if (!field) throw py::value_error("unknown field: " + field_name);
            if (kind == "equals") {
              q.predicates.push_back(Predicate::equals(*field, value));
            } else if (kind == "contains") {
              q.predicates.push_back(Predicate::contains(*field, value));
            } else {
              throw py::value_error("match kind must be 'equals' or 'contains'");
            }
          }
          py::list out;
          for (const auto& r : scan(root, q).records) {
            py::dict item;
            item["path"] = r.path.generic_string();
            item["metadata"] = to_dict(r.metadata);
            item["descriptor"] = descriptor_dict(r.descriptor);
            out.append(item);
          }
          return out;
        },
        py::arg("root"), py::arg("predicates") = std::vector<std::tuple<std::string, std::string, std::string>>{},
        py::arg("case_sensitive") = false);

#ifdef DICODERMA_VERSION
  m.attr("__version__") = DICODERMA_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
