#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "satlink/errors.hpp"
#include "satlink/scenario.hpp"

using namespace satlink;

TEST_CASE("manifest round-trips through the parser") {
    ScenarioConfig cfg = default_scenario();
    cfg.symbol_rate_hz = 2.5e6;
    cfg.duration_s = 3.25;
    cfg.seed = 99;
    cfg.geometry.gain_db[0][1] = 1.8;
    cfg.geometry.phase_deg[0][1] = 180.0;
    cfg.mixing[1] = {0.25, 0.75};
    cfg.transponders[1].frequency_offset_hz = 50.0;
    cfg.mode_schedule = {{0.0, PrecoderMode::Unprecoded}, {1.0, PrecoderMode::MMSE}};
    cfg.comp_schedule = {{0.0, false}, {0.5, true}};
    cfg.modcod.push_back({Modulation::QPSK, 1, 2, 1.0, "QPSK 1/2"});
    cfg.pac.power_budget = {0.7, 0.7};
    cfg.validate();

    ScenarioConfig parsed = default_scenario();
    apply_config_text(parsed, cfg.manifest());
    CHECK(parsed.manifest() == cfg.manifest());
    CHECK(parsed.symbol_rate_hz == cfg.symbol_rate_hz);
    CHECK(parsed.mode_schedule.size() == 2);
    CHECK(parsed.mode_schedule[1].second == PrecoderMode::MMSE);
    CHECK(parsed.modcod.size() == 1);
    CHECK(parsed.modcod[0].label == "QPSK 1/2");
}

TEST_CASE("schedule lookups pick the latest entry at or before t") {
    ScenarioConfig cfg = default_scenario();
    cfg.mode_schedule = {{0.0, PrecoderMode::Unprecoded},
                         {1.0, PrecoderMode::MMSE},
                         {2.0, PrecoderMode::MMSE_PAC}};
    cfg.comp_schedule = {{0.0, false}, {1.5, true}};
    CHECK(cfg.mode_at(0.5) == PrecoderMode::Unprecoded);
    CHECK(cfg.mode_at(1.0) == PrecoderMode::MMSE);
    CHECK(cfg.mode_at(10.0) == PrecoderMode::MMSE_PAC);
    CHECK_FALSE(cfg.compensation_at(1.49));
    CHECK(cfg.compensation_at(1.5));
}

TEST_CASE("config errors carry the offending field path") {
    ScenarioConfig cfg = default_scenario();

    CHECK_THROWS_WITH_AS(apply_config_text(cfg, "bogus.key = 1"), "bogus.key: unknown key",
                         ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "sim.duration_s = fast"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "sim.duration_s = -1"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "precoder.schedule = 0:mmse 0:unprecoded"),
                    ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "mixing.ut0_alpha = 0\nmixing.ut0_beta = 0"),
                    ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "layout.data_frame_length = 1261"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "no equals sign here"), ConfigError);

    try {
        apply_config_text(cfg, "noise.ut1_variance = -0.5");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "noise.ut1_variance");
    }
}

TEST_CASE("comments and blank lines are ignored") {
    ScenarioConfig cfg = default_scenario();
    apply_config_text(cfg,
                      "# comment line\n"
                      "\n"
                      "sim.seed = 5  # trailing comment\n");
    CHECK(cfg.seed == 5);
}

TEST_CASE("presets validate and carry their documented shapes") {
    const auto [off, on] = preset_compensation_experiment();
    off.validate();
    on.validate();
    CHECK(off.duration_s == 25.0);
    CHECK(on.duration_s == 25.0);
    CHECK_FALSE(off.compensation_at(10.0));
    CHECK(on.compensation_at(10.0));
    CHECK(on.transponders[1].frequency_offset_hz - on.transponders[0].frequency_offset_hz ==
          50.0);
    CHECK(off.manifest() != on.manifest());

    const ScenarioConfig csi = preset_csi_stability();
    csi.validate();
    CHECK(csi.duration_s == 120.0);
    const ScenarioConfig quiet = preset_csi_stability(true);
    quiet.validate();
    CHECK(quiet.noise_variance[0] == 0.0);
    CHECK(quiet.geometry.amp_drift_db_per_hour == 0.0);

    const PrecodingGainsPreset triple = preset_precoding_gains();
    triple.unprecoded.validate();
    triple.mmse.validate();
    triple.mmse_pac.validate();
    CHECK(triple.unprecoded.mode_at(1.0) == PrecoderMode::Unprecoded);
    CHECK(triple.mmse.mode_at(1.0) == PrecoderMode::MMSE);
    CHECK(triple.mmse_pac.mode_at(1.0) == PrecoderMode::MMSE_PAC);
    // the triple differs only in the precoder mode
    ScenarioConfig a = triple.mmse;
    a.mode_schedule = triple.unprecoded.mode_schedule;
    CHECK(a.manifest() == triple.unprecoded.manifest());
}
