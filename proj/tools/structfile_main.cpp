// Command-line tool over the structured-file library: inspect, convert,
// extract, validate.
//
// Exit codes: 0 success, 2 format/decode error, 3 path or usage error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "structfile/binary.hpp"
#include "structfile/blockstore.hpp"
#include "structfile/data.hpp"
#include "structfile/stream.hpp"
#include "structfile/textdata.hpp"

namespace sf = structfile;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitPath = 3;

bool g_json = false;

int report(int code, const sf::Error& e) {
    if (g_json) {
        nlohmann::json j;
        j["error"] = sf::errcName(e.code());
        j["message"] = e.what();
        if (e.offset()) j["offset"] = *e.offset();
        std::cerr << j.dump() << "\n";
    } else {
        std::cerr << "structfile: " << e.what() << "\n";
    }
    return code;
}

int errorClass(sf::Errc c) {
    switch (c) {
        case sf::Errc::PathSyntax:
        case sf::Errc::NoSuchField:
        case sf::Errc::FieldNotPresent:
        case sf::Errc::InactiveUnionField:
        case sf::Errc::IndexOutOfRange:
        case sf::Errc::WrongType: return kExitPath;
        default: return kExitFormat;
    }
}

// Loads a whole file either lazily (binary) or via the text reader.
struct Input {
    sf::FileHeader header;
    sf::DataHandle root;
    std::shared_ptr<sf::FileSession> session;  // set for binary inputs
};

Input openInput(const std::string& path) {
    Input in;
    auto src = std::make_shared<sf::FileSource>(path);
    in.header = sf::scanHeader(*src);
    if (in.header.isBinary()) {
        in.session = sf::FileSession::open(src);
        in.header = in.session->header();
        in.root = in.session->root();
    } else {
        std::uint64_t size = src->size();
        std::string text(std::size_t(size - in.header.dataStart), '\0');
        src->readAt(in.header.dataStart,
                    {reinterpret_cast<std::byte*>(text.data()), text.size()});
        in.root = sf::readData(in.header.typeEnv->root(), in.header.typeEnv, text);
    }
    return in;
}

void writeTextFile(const Input& in, sf::ByteSink& out, bool pretty) {
    sf::FileHeader h = in.header;
    h.mode = sf::FileMode::Text;
    sf::writeHeader(h, out);
    std::string data = sf::printData(in.root, pretty);
    data += '\n';
    out.writeText(data);
}

int cmdType(const std::string& file) {
    Input in = openInput(file);
    std::fputs(sf::printType(in.header.typeEnv->root(), *in.header.typeEnv).c_str(), stdout);
    return 0;
}

int cmdDump(const std::string& file, bool pretty) {
    Input in = openInput(file);
    sf::RawStreamSink out(stdout);
    writeTextFile(in, out, pretty);
    out.flush();
    return 0;
}

int cmdConvert(const std::string& inPath, const std::string& outPath, const std::string& to,
               const std::string& order) {
    Input in = openInput(inPath);
    if (to == "text") {
        sf::FileSink out(outPath);
        writeTextFile(in, out, false);
        out.flush();
        return 0;
    }
    sf::FileHeader h = in.header;
    h.mode = order == "le" ? sf::FileMode::BinaryLittle : sf::FileMode::BinaryBig;
    std::unique_ptr<sf::ByteSink> out;
    if (outPath == "-")
        out = std::make_unique<sf::RawStreamSink>(stdout);
    else
        out = std::make_unique<sf::FileSink>(outPath);
    auto* seekable = dynamic_cast<sf::SeekableSink*>(out.get());
    if (!seekable)
        sf::fail(sf::Errc::NotSeekable, "binary output needs a seekable sink, not a pipe");
    // Stream the value across so binary inputs stay lazy.
    sf::StreamWriter writer(h, *seekable);
    sf::streamWriteAll(writer, in.root);
    out->flush();
    return 0;
}

int cmdGet(const std::string& file, const std::string& path, bool stats) {
    Input in = openInput(file);
    sf::DataHandle node = sf::pathGet(in.root, path);
    std::string text = sf::printData(node, false);
    std::fputs(text.c_str(), stdout);
    std::fputc('\n', stdout);
    if (stats && in.session) {
        std::fprintf(stderr, "bytes read: %llu of %llu\n",
                     static_cast<unsigned long long>(in.session->bytesRead()),
                     static_cast<unsigned long long>(in.session->fileSize()));
    }
    return 0;
}

int cmdValidate(const std::string& file, bool forceStore) {
    if (forceStore || sf::BlockStore::isStoreFile(file)) {
        sf::BlockStoreConfig cfg;
        cfg.writable = false;
        auto store = sf::BlockStore::open(file, cfg);
        store->verify();
        store->auditLayout();
        std::puts("ok");
        return 0;
    }
    sf::FileSource src(file);
    sf::SourceCursor cur(src);
    sf::FileHeader h = sf::scanHeader(cur);
    if (h.isBinary()) {
        sf::decodeValue(h.typeEnv->root(), h.typeEnv, h.order(), cur);
        if (!cur.atEnd())
            sf::failAt(sf::Errc::ValidationError, "trailing bytes after the root value",
                       cur.position());
    } else {
        std::string text(std::size_t(src.size() - h.dataStart), '\0');
        src.readAt(h.dataStart, {reinterpret_cast<std::byte*>(text.data()), text.size()});
        sf::readData(h.typeEnv->root(), h.typeEnv, text);
    }
    std::puts("ok");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured data files: inspect, convert, extract, validate"};
    app.require_subcommand(1);
    app.add_flag("--json", g_json, "machine-readable errors on stderr");

    std::string file, outPath, pathExpr;
    std::string to = "binary", order = "be";
    bool pretty = false, stats = false, forceStore = false;

    auto* typeCmd = app.add_subcommand("type", "print the embedded data type");
    typeCmd->add_option("file", file)->required();

    auto* dumpCmd = app.add_subcommand("dump", "print the file as text");
    dumpCmd->add_option("file", file)->required();
    dumpCmd->add_flag("--pretty", pretty, "indent nested values");

    auto* convCmd = app.add_subcommand("convert", "rewrite in another representation");
    convCmd->add_option("input", file)->required();
    convCmd->add_option("output", outPath)->required();
    convCmd->add_option("--to", to, "target representation")
        ->check(CLI::IsMember({"text", "binary"}));
    convCmd->add_option("--order", order, "byte order for binary output")
        ->check(CLI::IsMember({"be", "le"}));

    auto* getCmd = app.add_subcommand("get", "print one value addressed by a path");
    getCmd->add_option("file", file)->required();
    getCmd->add_option("path", pathExpr)->required();
    getCmd->add_flag("--stats", stats, "report bytes read");

    auto* valCmd = app.add_subcommand("validate", "decode the whole file");
    valCmd->add_option("file", file)->required();
    valCmd->add_flag("--store", forceStore, "treat the file as a block store");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitPath;
    }

    try {
        if (typeCmd->parsed()) return cmdType(file);
        if (dumpCmd->parsed()) return cmdDump(file, pretty);
        if (convCmd->parsed()) return cmdConvert(file, outPath, to, order);
        if (getCmd->parsed()) return cmdGet(file, pathExpr, stats);
        if (valCmd->parsed()) return cmdValidate(file, forceStore);
    } catch (const sf::Error& e) {
        if (getCmd->parsed()) {
            // Inside get, access errors are path errors; format errors keep
            // their own exit code.
            return report(errorClass(e.code()), e);
        }
        return report(kExitFormat, e);
    } catch (const std::exception& e) {
        std::cerr << "structfile: " << e.what() << "\n";
        return kExitFormat;
    }
    return kExitPath;
}
