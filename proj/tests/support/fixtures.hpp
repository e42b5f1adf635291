#pragma once

// Deterministic builders for the committed fixture files. Tests regenerate
// the bytes and compare them against the files under tests/fixtures; set
// STRUCTFILE_WRITE_FIXTURES=1 to rewrite the files after an intentional
// format change.

#include <vector>

#include "structfile/binary.hpp"
#include "structfile/data.hpp"
#include "structfile/ddl.hpp"
#include "structfile/textdata.hpp"
#include "support/golden.hpp"

namespace fixtures {

using namespace structfile;

inline DataHandle buildTrajectoryValue(const EnvPtr& env) {
    DataHandle v = newDirect(env);
    DataHandle desc = v["molecule_description"];
    desc["molecule_name"].assignString("water");
    desc["atom_classes"].resize(1);
    desc["atom_classes"].elem(0)["atom_class_id"].assignInt(1);
    desc["atom_classes"].elem(0)["atom_class_number"].assignInt(2);
    desc["atom_classes"].elem(0)["atom_class_name"].assignString("oxygen");
    desc["atoms"].resize(3);
    const char* names[] = {"O", "H1", "H2"};
    for (std::size_t i = 0; i < 3; ++i) {
        desc["atoms"].elem(i)["atom_id"].assignInt(std::int64_t(i + 1));
        desc["atoms"].elem(i)["atom_name"].assignString(names[i]);
    }
    desc["bonds"].resize(2);
    for (std::size_t i = 0; i < 2; ++i) {
        desc["bonds"].elem(i)["bond_from_id"].assignInt(1);
        desc["bonds"].elem(i)["bond_to_id"].assignInt(std::int64_t(i + 2));
        desc["bonds"].elem(i)["bond_type"].assignInt(1);
    }

    DataHandle steps = v["timesteps"];
    steps.resize(2);
    {
        DataHandle s0 = steps.elem(0);
        MatrixValue obs(NumKind::F4, MatrixShape::fromCounts({1}));
        obs.setCellDouble(0, 1.5);
        s0["global_obs"].assignMatrix(obs);
        MatrixValue coords(NumKind::F4, MatrixShape::fromCounts({3, 3}));
        for (std::uint64_t c = 0; c < 9; ++c) coords.setCellDouble(c, 0.25 * double(c));
        s0["coordinates"].assignMatrix(coords);
        // velocity and potential stay absent in the first step
    }
    {
        DataHandle s1 = steps.elem(1);
        MatrixValue obs(NumKind::F4, MatrixShape::fromCounts({2}));
        obs.setCellDouble(0, 2.5);
        obs.setCellDouble(1, -0.5);
        s1["global_obs"].assignMatrix(obs);
        MatrixValue coords(NumKind::F4, MatrixShape::fromCounts({3, 3}));
        for (std::uint64_t c = 0; c < 9; ++c) coords.setCellDouble(c, 0.25 * double(c) + 1.0);
        s1["coordinates"].assignMatrix(coords);
        s1.setFieldPresent("velocity");
        MatrixValue vel(NumKind::F4, MatrixShape::fromCounts({3, 2}));
        for (std::uint64_t c = 0; c < 6; ++c) vel.setCellDouble(c, -0.125 * double(c));
        s1["velocity"].assignMatrix(vel);
        s1.setFieldPresent("potential");
        DataHandle pot = s1["potential"];
        MatrixValue bb(NumKind::F4, MatrixShape::fromCounts({3, 2}));
        for (std::uint64_t c = 0; c < 6; ++c) bb.setCellDouble(c, double(c));
        pot["bb"].assignMatrix(bb);
        MatrixValue data(NumKind::F4, MatrixShape::fromCounts({1, 2, 1}));
        data.setCellDouble(0, 9.0);
        data.setCellDouble(1, 10.0);
        pot["data"].assignMatrix(data);
    }
    return v;
}

inline std::vector<std::byte> trajectoryFileBytes() {
    EnvPtr env = parseTypeText(golden::kTrajectoryTypeText);
    FileHeader h;
    h.mode = FileMode::BinaryBig;
    h.typeEnv = env;
    h.comments = {"@Date= 18. 3.1998     Time: 15:26"};
    MemorySink sink;
    writeHeader(h, sink);
    encodeValue(buildTrajectoryValue(env), ByteOrder::Big, sink);
    return sink.take();
}

inline std::vector<std::byte> trajectoryTextBytes() {
    EnvPtr env = parseTypeText(golden::kTrajectoryTypeText);
    FileHeader h;
    h.mode = FileMode::Text;
    h.typeEnv = env;
    h.comments = {"@Date= 18. 3.1998     Time: 15:26"};
    MemorySink sink;
    writeHeader(h, sink);
    std::string text = printData(buildTrajectoryValue(env), false);
    text += '\n';
    sink.writeText(text);
    return sink.take();
}

inline std::vector<std::byte> anyFileBytes() {
    EnvPtr env = parseTypeText("struct { userdata : any; lots_of_userdata : array of any; }");
    DataHandle v = newDirect(env);
    EnvPtr s = parseTypeText("struct { note : string; n : integer*2; }");
    v["userdata"].actualizeType(s->root(), s);
    v["userdata"]["note"].assignString("bound late");
    v["userdata"]["n"].assignInt(7);
    v["lots_of_userdata"].resize(3);
    v["lots_of_userdata"].elem(0).actualizeType(parseTypeText("integer*8")->root());
    v["lots_of_userdata"].elem(0).assignInt(123456789);
    v["lots_of_userdata"].elem(1).actualizeType(parseTypeText("string")->root());
    v["lots_of_userdata"].elem(1).assignString("each element its own type");
    v["lots_of_userdata"].elem(2).actualizeType(parseTypeText("real*4[2,2]")->root());
    MatrixValue m(NumKind::F4, MatrixShape::fromCounts({2, 2}));
    for (std::uint64_t c = 0; c < 4; ++c) m.setCellDouble(c, 0.5 * double(c));
    v["lots_of_userdata"].elem(2).assignMatrix(m);

    FileHeader h;
    h.mode = FileMode::BinaryBig;
    h.typeEnv = env;
    MemorySink sink;
    writeHeader(h, sink);
    encodeValue(v, ByteOrder::Big, sink);
    return sink.take();
}

}  // namespace fixtures
