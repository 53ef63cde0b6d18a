from aclab.lb import Decision, choose_server, embed_decision


def test_balances_toward_the_emptier_server():
    assert choose_server(500, (500, 0)) == 1
    d = embed_decision(1, 500, (500, 0))
    assert d.view_after == (500, 500)


def test_tie_breaks_to_lowest_index():
    assert choose_server(550, (0, 0)) == 0
    assert choose_server(500, (300, 300, 300)) == 0


def test_rejects_when_no_server_fits():
    d = embed_decision(9, 500, (600, 600), capacities=(1000, 1000))
    assert d.rejected
    assert d.server is None
    assert d.view_after == (600, 600)


def test_capacity_filters_candidates():
    # server 0 would balance best but is full; 1 still fits
    assert choose_server(500, (100, 900), capacities=(400, 10 ** 6)) == 1


def test_pure_function_of_inputs():
    view = (1200, 700, 900)
    first = choose_server(575, view)
    for _ in range(5):
        assert choose_server(575, view) == first


def test_minimizes_population_deviation_exactly():
    # placing 100 onto (0, 50, 200): candidate vectors and their pstdev
    # (100,50,200) -> 62.4; (0,150,200) -> 84.9; (0,50,300) -> 133.7
    assert choose_server(100, (0, 50, 200)) == 0
