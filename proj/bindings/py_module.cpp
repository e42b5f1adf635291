// Python bindings for the structured-file library: type parsing, data
// handles, text and binary files, lazy reading, and the block store.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "structfile/binary.hpp"
#include "structfile/blockstore.hpp"
#include "structfile/data.hpp"
#include "structfile/ddl.hpp"
#include "structfile/stream.hpp"
#include "structfile/textdata.hpp"
#include "structfile/typedesc.hpp"

namespace py = pybind11;
namespace sf = structfile;

namespace {

// pybind11 holders cannot be shared_ptr-to-const; carry the environment in a
// small value wrapper instead.
struct PyEnv {
    sf::EnvPtr env;
};

sf::ByteOrder orderFrom(const std::string& s) {
    if (s == "be") return sf::ByteOrder::Big;
    if (s == "le") return sf::ByteOrder::Little;
    throw py::value_error("byte order must be 'be' or 'le'");
}

// Dispatches a python value onto the right assign call for the node type.
void assignAny(sf::DataHandle& h, py::handle v) {
    sf::TypePtr t = h.type();
    if (t->isAny()) h.getString();  // raises UnboundAny
    if (const auto* n = t->asNum(); n && n->dims.empty()) {
        if (numIsFloat(n->kind))
            h.assignDouble(v.cast<double>());
        else
            h.assignInt(v.cast<std::int64_t>());
        return;
    }
    if (t->asString()) {
        if (py::isinstance<py::bytes>(v)) {
            h.assignString(v.cast<std::string>());
        } else {
            h.assignString(v.cast<std::string>());
        }
        return;
    }
    throw py::type_error("assign works on scalar and string nodes; "
                         "use fields/elements for composites");
}

py::object getAny(const sf::DataHandle& h) {
    sf::TypePtr t = h.type();
    if (t->isAny()) h.getString();  // raises UnboundAny
    if (const auto* n = t->asNum(); n && n->dims.empty()) {
        if (numIsFloat(n->kind)) return py::float_(h.getDouble());
        return py::int_(h.getInt());
    }
    if (const auto* s = t->asString()) {
        std::string bytes = h.getString();
        if (s->opaque) return py::bytes(bytes);
        return py::str(py::bytes(bytes));
    }
    throw py::type_error("get works on scalar and string nodes");
}

}  // namespace

PYBIND11_MODULE(_structfile, m) {
    m.doc() = "self-describing structured data files";

    py::register_exception<sf::Error>(m, "StructFileError");

    py::class_<PyEnv>(m, "TypeEnv")
        .def_property_readonly(
            "type_text", [](const PyEnv& e) { return sf::printType(e.env->root(), *e.env); })
        .def("__repr__", [](const PyEnv& e) {
            return "<TypeEnv " + sf::printTypeExpr(e.env->root()) + ">";
        });

    m.def("parse_type_text",
          [](const std::string& src) { return PyEnv{sf::parseTypeText(src)}; },
          "parse the textual type language into a type environment");

    py::class_<sf::DataHandle>(m, "Data")
        .def_property_readonly("type_text",
                               [](const sf::DataHandle& h) { return sf::printTypeExpr(h.type()); })
        .def("__getitem__",
             [](const sf::DataHandle& h, const std::string& name) { return h.field(name); })
        .def("__getitem__",
             [](const sf::DataHandle& h, std::size_t i) { return h[i]; })
        .def("__len__",
             [](const sf::DataHandle& h) {
                 sf::TypePtr t = h.type();
                 if (t->asStruct()) return h.nFields();
                 return h.nElements();
             })
        .def("field_names",
             [](const sf::DataHandle& h) {
                 std::vector<std::string> names;
                 for (std::size_t i = 0; i < h.nFields(); ++i) names.push_back(h.fieldName(i));
                 return names;
             })
        .def("resize", [](sf::DataHandle& h, std::size_t n) { h.resize(n); })
        .def("assign", &assignAny)
        .def("get", &getAny)
        .def("get_bytes", [](const sf::DataHandle& h) { return py::bytes(h.getString()); })
        .def("field_present",
             [](const sf::DataHandle& h, const std::string& n) { return h.fieldPresent(n); })
        .def("set_field_present",
             [](sf::DataHandle& h, const std::string& n) { h.setFieldPresent(n); })
        .def("unset_field", [](sf::DataHandle& h, const std::string& n) { h.unsetField(n); })
        .def_property_readonly("active_field",
                               [](const sf::DataHandle& h) { return h.activeField(); })
        .def("set_active_field", [](sf::DataHandle& h, std::size_t i) { h.setActiveField(i); })
        .def("actualize",
             [](sf::DataHandle& h, const std::string& typeText) {
                 sf::EnvPtr env = sf::parseTypeText(typeText);
                 h.actualizeType(env->root(), env);
             })
        .def("path", [](const sf::DataHandle& h, const std::string& p) { return sf::pathGet(h, p); })
        .def("copy_from", [](sf::DataHandle& h, const sf::DataHandle& src) { h.copyFrom(src); })
        .def("equals", [](const sf::DataHandle& a, const sf::DataHandle& b) {
            return sf::dataEquals(a, b);
        })
        .def("to_text",
             [](const sf::DataHandle& h, bool pretty) { return sf::printData(h, pretty); },
             py::arg("pretty") = false);

    m.def("new_data", [](const PyEnv& env) { return sf::newDirect(env.env); },
          "in-memory value of the environment's root type");

    m.def("read_text_data", [](const PyEnv& env, const std::string& text) {
        return sf::readData(env.env->root(), env.env, text);
    });

    m.def("write_binary_file",
          [](const std::string& path, const sf::DataHandle& d, const PyEnv& env,
             const std::string& order, const std::vector<std::string>& comments) {
              sf::FileHeader h;
              h.mode = orderFrom(order) == sf::ByteOrder::Big ? sf::FileMode::BinaryBig
                                                              : sf::FileMode::BinaryLittle;
              h.typeEnv = env.env;
              h.comments = comments;
              sf::FileSink sink(path);
              sf::StreamWriter w(h, sink);
              sf::streamWriteAll(w, d);
              sink.flush();
          },
          py::arg("path"), py::arg("data"), py::arg("env"), py::arg("order") = "be",
          py::arg("comments") = std::vector<std::string>{});

    m.def("write_text_file",
          [](const std::string& path, const sf::DataHandle& d, const PyEnv& env,
             const std::vector<std::string>& comments) {
              sf::FileHeader h;
              h.mode = sf::FileMode::Text;
              h.typeEnv = env.env;
              h.comments = comments;
              sf::FileSink sink(path);
              sf::writeHeader(h, sink);
              std::string text = sf::printData(d, false);
              text += '\n';
              sink.writeText(text);
              sink.flush();
          },
          py::arg("path"), py::arg("data"), py::arg("env"),
          py::arg("comments") = std::vector<std::string>{});

    py::class_<sf::FileSession, std::shared_ptr<sf::FileSession>>(m, "LazyFile")
        .def_property_readonly("root", [](sf::FileSession& s) { return s.root(); })
        .def_property_readonly("type_env", [](const sf::FileSession& s) {
            return PyEnv{s.header().typeEnv};
        })
        .def_property_readonly("comments",
                               [](const sf::FileSession& s) { return s.header().comments; })
        .def_property_readonly("bytes_read",
                               [](const sf::FileSession& s) { return s.bytesRead(); })
        .def_property_readonly("file_size",
                               [](const sf::FileSession& s) { return s.fileSize(); });

    m.def("open_binary", [](const std::string& path) { return sf::FileSession::open(path); },
          "lazy read-only view of a binary structured file");

    py::class_<sf::BlockStore, std::shared_ptr<sf::BlockStore>>(m, "BlockStore")
        .def_property_readonly("root", [](sf::BlockStore& s) { return s.rootHandle(); })
        .def("verify", [](sf::BlockStore& s) { s.verify(); })
        .def("audit_layout", [](sf::BlockStore& s) { s.auditLayout(); })
        .def("close", [](sf::BlockStore& s) { s.close(); });

    m.def("create_store", [](const std::string& path, const PyEnv& env) {
        return sf::BlockStore::create(path, env.env);
    });
    m.def("open_store", [](const std::string& path) { return sf::BlockStore::open(path); });

    m.def("type_to_data",
          [](const PyEnv& env) { return sf::typeToData(env.env->root(), *env.env); });
    m.def("data_to_type",
          [](const sf::DataHandle& d) { return sf::printTypeExpr(sf::dataToType(d)); });
}
