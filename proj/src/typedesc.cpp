#include "structfile/typedesc.hpp"

#include "structfile/ddl.hpp"

namespace structfile {

namespace {

const char* kDescriptorSource = R"(
typedef TypeDescriptor = union {
    num : struct {
        isFloat : integer*1;
        size : integer*1;
        dim : array of integer*4;
    };
    string : struct {
        isOpaque : integer*1;
        size : integer*4;
    };
    struct : struct {
        isUnion : integer*1;
        fields : array of struct {
            name : string;
            typ : type TypeDescriptor;
            isOptional : integer*1;
        };
    };
    array : struct {
        size : integer*4;
        subtype : type TypeDescriptor;
    };
    named : struct {
        name : string;
    };
};
type TypeDescriptor;
)";

enum Variant : std::size_t { kNum = 0, kString = 1, kStruct = 2, kArray = 3, kNamed = 4 };

void typeToDataRec(const DataHandle& d, const TypePtr& t, const TypeEnv& env) {
    if (const auto* n = t->asNum()) {
        d.setActiveField(kNum);
        DataHandle v = d.fieldAt(kNum);
        v["isFloat"].assignInt(numIsFloat(n->kind) ? 1 : 0);
        v["size"].assignInt(numWidth(n->kind));
        DataHandle dims = v["dim"];
        dims.resize(n->dims.size());
        for (std::size_t i = 0; i < n->dims.size(); ++i)
            dims.elem(i).assignInt(n->dims[i].isFree() ? -1 : n->dims[i].count());
        return;
    }
    if (const auto* s = t->asString()) {
        d.setActiveField(kString);
        DataHandle v = d.fieldAt(kString);
        v["isOpaque"].assignInt(s->opaque ? 1 : 0);
        v["size"].assignInt(s->size.isFree() ? -1 : s->size.count());
        return;
    }
    if (const auto* st = t->asStruct()) {
        d.setActiveField(kStruct);
        DataHandle v = d.fieldAt(kStruct);
        v["isUnion"].assignInt(st->isUnion ? 1 : 0);
        DataHandle fields = v["fields"];
        fields.resize(st->fields.size());
        for (std::size_t i = 0; i < st->fields.size(); ++i) {
            DataHandle f = fields.elem(i);
            f["name"].assignString(st->fields[i].name);
            f["isOptional"].assignInt(st->fields[i].optional ? 1 : 0);
            typeToDataRec(f["typ"], st->fields[i].type, env);
        }
        return;
    }
    if (const auto* a = t->asArray()) {
        d.setActiveField(kArray);
        DataHandle v = d.fieldAt(kArray);
        v["size"].assignInt(a->size.isFree() ? -1 : a->size.count());
        typeToDataRec(v["subtype"], a->elem, env);
        return;
    }
    if (const auto* nm = t->asNamed()) {
        env.resolve(nm->name);  // UnknownTypeName when unresolvable
        d.setActiveField(kNamed);
        d.fieldAt(kNamed)["name"].assignString(nm->name);
        return;
    }
    // any: the named variant with the reserved name
    d.setActiveField(kNamed);
    d.fieldAt(kNamed)["name"].assignString("any");
}

[[noreturn]] void badDescriptor(const std::string& what) {
    fail(Errc::BadDescriptor, what);
}

Dim dimFromDescriptor(std::int64_t v, const char* what) {
    if (v == -1) return Dim::free();
    if (v < 1 || v > 0x7fffffff)
        badDescriptor(std::string(what) + " must be -1 (free) or a positive count");
    return Dim::fixed(v);
}

TypePtr dataToTypeRec(const DataHandle& d, int depth) {
    if (depth > 256) badDescriptor("descriptor nesting too deep");
    switch (d.activeField()) {
        case kNum: {
            DataHandle v = d.fieldAt(kNum);
            bool isFloat = v["isFloat"].getInt() != 0;
            std::int64_t width = v["size"].getInt();
            NumKind kind;
            if (isFloat) {
                if (width == 4)
                    kind = NumKind::F4;
                else if (width == 8)
                    kind = NumKind::F8;
                else if (width == 16)
                    kind = NumKind::F16;
                else
                    badDescriptor("illegal real width " + std::to_string(width));
            } else {
                if (width == 1)
                    kind = NumKind::I1;
                else if (width == 2)
                    kind = NumKind::I2;
                else if (width == 4)
                    kind = NumKind::I4;
                else if (width == 8)
                    kind = NumKind::I8;
                else
                    badDescriptor("illegal integer width " + std::to_string(width));
            }
            DataHandle dims = v["dim"];
            std::vector<Dim> dd;
            dd.reserve(dims.nElements());
            for (std::size_t i = 0; i < dims.nElements(); ++i)
                dd.push_back(dimFromDescriptor(dims.elem(i).getInt(), "dimension"));
            return makeNum(kind, std::move(dd));
        }
        case kString: {
            DataHandle v = d.fieldAt(kString);
            return makeString(dimFromDescriptor(v["size"].getInt(), "string size"),
                              v["isOpaque"].getInt() != 0);
        }
        case kStruct: {
            DataHandle v = d.fieldAt(kStruct);
            bool isUnion = v["isUnion"].getInt() != 0;
            DataHandle fields = v["fields"];
            std::vector<Field> fs;
            fs.reserve(fields.nElements());
            for (std::size_t i = 0; i < fields.nElements(); ++i) {
                DataHandle f = fields.elem(i);
                fs.push_back(Field{f["name"].getString(), dataToTypeRec(f["typ"], depth + 1),
                                   f["isOptional"].getInt() != 0});
            }
            try {
                return makeStruct(std::move(fs), isUnion);
            } catch (const Error& e) {
                badDescriptor(e.what());
            }
        }
        case kArray: {
            DataHandle v = d.fieldAt(kArray);
            return makeArray(dimFromDescriptor(v["size"].getInt(), "array size"),
                             dataToTypeRec(v["subtype"], depth + 1));
        }
        case kNamed: {
            std::string name = d.fieldAt(kNamed)["name"].getString();
            if (name == "any") return makeAny();
            if (name.empty()) badDescriptor("empty type name");
            return makeNamed(std::move(name));
        }
        default: badDescriptor("unknown descriptor variant");
    }
}

}  // namespace

const EnvPtr& typeDescriptorEnv() {
    static const EnvPtr env = parseTypeText(kDescriptorSource);
    return env;
}

const TypePtr& typeDescriptorType() {
    static const TypePtr t = typeDescriptorEnv()->resolve("TypeDescriptor");
    return t;
}

DataHandle typeToData(const TypePtr& t, const TypeEnv& env) {
    if (!t) fail(Errc::ValidationError, "null type");
    DataHandle d = newDirect(typeDescriptorType(), typeDescriptorEnv());
    typeToDataRec(d, t, env);
    return d;
}

TypePtr dataToType(const DataHandle& d) {
    if (d.isNull()) fail(Errc::NullHandle, "dataToType on a null handle");
    if (!typeEquals(d.declaredType(), *d.env(), typeDescriptorType(), *typeDescriptorEnv()))
        badDescriptor("value is not of the TypeDescriptor type");
    return dataToTypeRec(d, 0);
}

}  // namespace structfile
