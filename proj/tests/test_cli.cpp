// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// End-to-end exercises of the command-line tool as a subprocess. The binary
// path arrives in LLSS_CLI_BIN (set by the build); every run works inside a
// temporary directory. Exit codes are part of the tool's contract: 0 success,
// 1 usage/config errors, 2 unreadable or corrupt data, 3 model/bitstream
// mismatch.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

// LLSS_CLI_BIN overrides; otherwise the tool is expected next to this binary.
std::string cli_bin() {
  if (const char* bin = std::getenv("LLSS_CLI_BIN")) return bin;
  char self[4096];
  const ssize_t len = ::readlink("/proc/self/exe", self, sizeof(self) - 1);
  REQUIRE_MESSAGE(len > 0, "cannot locate the test binary");
  self[len] = '\0';
  const fs::path candidate = fs::path(self).parent_path() / "llss";
  REQUIRE_MESSAGE(fs::exists(candidate), "llss binary not found beside the tests");
  return candidate.string();
}

int run(const std::string& args) {
  const std::string cmd = "'" + cli_bin() + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

// Small-model override flags matching testutil::toy_config().
const char* kToyFlags =
    "--feature-channels 16 --motion-ae-channels 16 --context-ae-channels 32 "
    "--hyper-channels 32 --bishift-channels 8 --bishift-group-channels 8 "
    "--bishift-cat-channels 4 --bishift-groups 2 --deform-groups 2 "
    "--base-max-disparity 64 --base-shift-stride 8";

}  // namespace

TEST_CASE("usage surface") {
  CHECK(run("--help") == 0);
  CHECK(run("train --help") == 0);
  CHECK(run("") == 1);                    // a subcommand is required
  CHECK(run("--frobnicate") == 1);        // unknown option
  CHECK(run("encode --model x.ckpt") == 1);  // missing required options
  CHECK(run("no-such-command") == 1);
}

TEST_CASE("pipeline: synth, train, encode, decode, eval, probe, bench") {
  testutil::TempDir tmp;
  const std::string data = tmp.sub("data");
  const std::string ckpt = tmp.sub("m.ckpt");

  REQUIRE(run("synth-data --out '" + data +
              "' --clips 2 --frames 3 --height 64 --width 64 --disparity 6 --motion 1.5") == 0);
  CHECK(fs::exists(data + "/clip0000/left/0002.png"));
  CHECK(fs::exists(data + "/clip0001/right/0000.png"));

  REQUIRE(run("train --data '" + data + "' --out '" + ckpt + "' " + kToyFlags +
              " --stage1-steps 2 --stage2-steps 2 --crop 64 --log-every 2 --log '" +
              tmp.sub("log.jsonl") + "' --ckpt-dir '" + tmp.sub("ckpts") + "'") == 0);
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(tmp.sub("log.jsonl")));
  CHECK(fs::exists(tmp.sub("ckpts/stage1.ckpt")));
  CHECK(fs::exists(tmp.sub("ckpts/stage2.ckpt")));

  const std::string bits = tmp.sub("clip.llss");
  REQUIRE(run("encode --model '" + ckpt + "' --in '" + data + "/clip0000' --out '" + bits +
              "'") == 0);
  REQUIRE(fs::exists(bits));
  CHECK(fs::file_size(bits) > 64);

  const std::string dec = tmp.sub("decoded");
  CHECK(run("decode --model '" + ckpt + "' --in '" + bits + "' --out '" + dec + "' --orig '" +
            data + "/clip0000'") == 0);
  CHECK(fs::exists(dec + "/left/0000.png"));
  CHECK(fs::exists(dec + "/right/0002.png"));

  CHECK(run("eval --model '" + ckpt + "' --data '" + data + "' --csv '" + tmp.sub("eval.csv") +
            "' --plot '" + tmp.sub("eval.png") + "'") == 0);
  CHECK(fs::exists(tmp.sub("eval.csv")));
  CHECK(fs::exists(tmp.sub("eval.png")));

  CHECK(run("probe --model '" + ckpt + "' --data '" + data + "' --top 4 --csv '" +
            tmp.sub("probe.csv") + "'") == 0);
  CHECK(fs::exists(tmp.sub("probe.csv")));

  CHECK(run(std::string("bench ") + kToyFlags + " --height 64 --width 64 --csv '" +
            tmp.sub("bench.csv") + "'") == 0);
  CHECK(fs::exists(tmp.sub("bench.csv")));

  // Decoding with a model trained from a different initialization seed is a
  // mismatch (exit 3), not garbage output.
  const std::string other = tmp.sub("other.ckpt");
  REQUIRE(run("train --data '" + data + "' --out '" + other + "' " + kToyFlags +
              " --init-seed 99 --stage1-steps 0 --stage2-steps 0") == 0);
  CHECK(run("decode --model '" + other + "' --in '" + bits + "' --out '" + tmp.sub("x") + "'") ==
        3);

  // Corrupt and missing inputs exit 2.
  std::ofstream(tmp.sub("junk.llss"), std::ios::binary) << "this is not a bitstream";
  CHECK(run("decode --model '" + ckpt + "' --in '" + tmp.sub("junk.llss") + "' --out '" +
            tmp.sub("y") + "'") == 2);
  CHECK(run("encode --model '" + ckpt + "' --in '" + tmp.sub("absent") + "' --out '" +
            tmp.sub("z.llss") + "'") == 2);
  CHECK(run("encode --model '" + tmp.sub("absent.ckpt") + "' --in '" + data +
            "/clip0000' --out '" + tmp.sub("z.llss") + "'") == 2);
}

TEST_CASE("invalid configuration is a usage error") {
  testutil::TempDir tmp;
  CHECK(run("bench --feature-channels 0") == 1);
  CHECK(run("bench --bishift-group-channels 30") == 1);  // must divide evenly
  CHECK(run("bench --height 60") == 1);                  // not a multiple of 64

  // A config file with an unknown key is rejected up front.
  const std::string cfg = tmp.sub("bad.cfg");
  std::ofstream(cfg) << "pony = 3\n";
  CHECK(run("bench --config '" + cfg + "'") == 1);
}
