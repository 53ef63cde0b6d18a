import pytest

from aclab.adaptation import (HOLD, Oca, PidConfig, RELAX, ThresholdConfig,
                              TIGHTEN, pid_action, threshold_action)


def test_threshold_window_mean_at_upper_trigger_tightens():
    cfg = ThresholdConfig()
    assert threshold_action([4.0, 4.0, 4.0, 4.0, 4.0], cfg) == TIGHTEN


def test_threshold_window_mean_at_lower_trigger_relaxes():
    cfg = ThresholdConfig()
    assert threshold_action([1.0] * 5, cfg) == RELAX


def test_threshold_holds_inside_the_band():
    cfg = ThresholdConfig()
    assert threshold_action([2.5] * 5, cfg) == HOLD


def test_threshold_uses_partial_window_when_history_is_short():
    cfg = ThresholdConfig(window=5)
    assert threshold_action([5.0], cfg) == TIGHTEN
    assert threshold_action([1.0, 1.2], cfg) == RELAX


def test_threshold_never_moves_while_mean_stays_in_band():
    cfg = ThresholdConfig()
    history = []
    for phi in [2.0, 3.0, 1.9, 3.4, 1.6, 2.49, 3.49, 1.51]:
        history.append(phi)
        window = history[-cfg.window:]
        if cfg.lower < sum(window) / len(window) < cfg.upper:
            assert threshold_action(history, cfg) == HOLD


def test_pid_all_samples_on_target_relaxes():
    cfg = PidConfig()
    # every term vanishes; 0 < target means relax
    assert pid_action([2.0] * 5, cfg) == RELAX


def test_pid_hand_computed_spike_case():
    cfg = PidConfig()
    # P = 0.2*(2-8) = -1.2; I = 0.2*6 = 1.2; D = 0.1*(6-0) = 0.6; total 0.6 < 2
    assert pid_action([2.0, 2.0, 2.0, 2.0, 8.0], cfg) == RELAX


def test_pid_sustained_error_drives_integral_term_to_tighten():
    cfg = PidConfig()
    # P = -1.2; I = 0.2*30 = 6.0; D = 0; total 4.8 > 2
    assert pid_action([8.0] * 5, cfg) == TIGHTEN


def test_pid_needs_two_samples():
    cfg = PidConfig()
    assert pid_action([9.0], cfg) == HOLD


def test_pid_window_sums_last_w_samples_only():
    cfg = PidConfig(window=5)
    # only the last five samples feed the integral term
    a = pid_action([100.0, 2.0, 2.0, 2.0, 2.0, 8.0], cfg)
    b = pid_action([2.0, 2.0, 2.0, 2.0, 8.0], cfg)
    assert a == b == RELAX


def test_oca_levels_clamp_at_both_ends():
    oca = Oca("threshold", ["s"], levels=11, initial_level=10)
    action, old, new = oca.report("s", 1.0)  # relax at the top: clamp
    assert (action, old, new) == (RELAX, 10, 10)
    oca.level["s"] = 0
    oca.history["s"] = []
    action, old, new = oca.report("s", 9.0)
    assert (action, old, new) == (TIGHTEN, 0, 0)


def test_oca_tighten_decrements_relax_increments():
    oca = Oca("threshold", ["s"], levels=11, initial_level=5)
    assert oca.report("s", 9.0)[2] == 4   # tighten toward strict
    oca.history["s"] = []
    oca.level["s"] = 5
    assert oca.report("s", 1.0)[2] == 6   # relax toward loose


def test_sustained_imbalance_drives_level_from_most_relaxed_to_strictest():
    oca = Oca("threshold", ["s"], levels=11, initial_level=10)
    for _ in range(20):
        oca.report("s", 8.0)
    assert oca.level["s"] == 0


def test_states_adapt_independently():
    oca = Oca("threshold", ["a", "b"], levels=11, initial_level=5)
    for _ in range(3):
        oca.report("a", 9.0)
    assert oca.level["a"] == 2
    assert oca.level["b"] == 5


def test_fixed_policy_never_moves():
    oca = Oca("fixed", ["s"], levels=11, initial_level=3)
    for phi in (9.0, 0.1, 5.0):
        assert oca.report("s", phi)[0] == HOLD
    assert oca.level["s"] == 3


def test_config_validation():
    with pytest.raises(ValueError):
        ThresholdConfig(upper=1.0, lower=2.0)
    with pytest.raises(ValueError):
        PidConfig(window=1)
