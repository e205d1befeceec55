import itertools, json

# load-share group over X1, X2, X5: X1 carries the whole load when X2 or X5 is down
lam = {"X5": 0.02, "X2": 0.03}
lam1 = {0: 0.01, 1: 0.05, 2: 0.1}   # X1 failure rate by number of failed partners
nu = {"X1": 0.3, "X2": 0.4, "X5": 0.5}
members = ["X1", "X2", "X5"]

def name(failed):
    return "ok" if not failed else "+".join(m for m in members if m in failed)

states, transitions, state_map = [], [], {}
for bits in itertools.product((0, 1), repeat=3):
    failed = {m for m, b in zip(members, bits) if b}
    states.append(name(failed)); state_map[name(failed)] = [m for m in members if m in failed]
for s in list(states):
    failed = set(state_map[s])
    for m in members:
        if m in failed:
            transitions.append({"from": s, "to": name(failed - {m}), "rate": nu[m]})
        else:
            rate = lam1[len(failed & {"X2", "X5"})] if m == "X1" else lam[m]
            transitions.append({"from": s, "to": name(failed | {m}), "rate": rate})
mm = {"states": states, "transitions": transitions, "members": members, "state_map": state_map}

def exp(r): return {"type": "exponential", "rate": r}
places = {}
for m in members:
    places[m + "_up"] = 1; places[m + "_down"] = 0
pn_transitions = [
    {"id": "F1", "distribution": exp(lam["X5"]), "inputs": {"X5_up": 1}, "outputs": {"X5_down": 1}},
    {"id": "F2", "distribution": exp(lam["X2"]), "inputs": {"X2_up": 1}, "outputs": {"X2_down": 1}},
    {"id": "F6", "distribution": exp(lam1[0]), "inputs": {"X1_up": 1}, "outputs": {"X1_down": 1},
     "inhibitors": {"X2_down": 1, "X5_down": 1}},
    {"id": "F3", "distribution": exp(lam1[1]), "inputs": {"X1_up": 1}, "outputs": {"X1_down": 1},
     "tests": {"X2_down": 1}, "inhibitors": {"X5_down": 1}},
    {"id": "F4", "distribution": exp(lam1[1]), "inputs": {"X1_up": 1}, "outputs": {"X1_down": 1},
     "tests": {"X5_down": 1}, "inhibitors": {"X2_down": 1}},
    {"id": "F5", "distribution": exp(lam1[2]), "inputs": {"X1_up": 1}, "outputs": {"X1_down": 1},
     "tests": {"X2_down": 1, "X5_down": 1}},
    {"id": "R1", "distribution": exp(nu["X5"]), "inputs": {"X5_down": 1}, "outputs": {"X5_up": 1}},
    {"id": "R2", "distribution": exp(nu["X2"]), "inputs": {"X2_down": 1}, "outputs": {"X2_up": 1}},
    {"id": "R3", "distribution": exp(nu["X1"]), "inputs": {"X1_down": 1}, "outputs": {"X1_up": 1}},
]
pn = {"places": places, "transitions": pn_transitions, "members": members,
      "marking_map": {m: m + "_down" for m in members}}

g0 = {"root": "G0", "gates": {
    "G0": {"type": "OR", "inputs": ["X1", "G1"]},
    "G1": {"type": "AND", "inputs": ["G2", "G3"]},
    "G2": {"type": "OR", "inputs": ["X2", "X3", "X4"]},
    "G3": {"type": "OR", "inputs": ["X5", "X6", "X7"]}}}
events = {
    "X1": {}, "X2": {}, "X5": {},
    "X3": {"failure_rate": 0.002, "repair_rate": 0.1},
    "X4": {"failure_rate": 0.001, "repair_rate": 0.05},
    "X6": {"failure_rate": 0.004, "repair_rate": 0.2},
    "X7": {"probability": 0.03, "frequency": 0.001},
}
model = {"format_version": 1, "basic_events": events, "fault_trees": {"G0": g0},
         "dependency_groups": {"DG1": {"members": members, "markov_model": "MM_load_share"}},
         "markov_models": {"MM_load_share": mm}, "petri_nets": {"PN_load_share": pn}}
json.dump(model, open("models/load_share.json", "w"), indent=2)

pn_model = json.loads(json.dumps(model))
pn_model["dependency_groups"]["DG1"] = {"members": members, "petri_net": "PN_load_share",
    "mission_time": 5000.0, "replications": 200, "seed": 20240601, "statistic": "time_average"}
json.dump(pn_model, open("models/load_share_pn.json", "w"), indent=2)

# event tree: Z0 heading, then G0 and K0 sharing X1 and X2
et_model = json.loads(json.dumps(model))
et_model["basic_events"].update({
    "X8": {"failure_rate": 0.003, "repair_rate": 0.1},
    "X9": {"failure_rate": 0.002, "repair_rate": 0.08},
    "X10": {"probability": 0.05},
    "Z0": {"probability": 0.002},
})
et_model["fault_trees"]["K0"] = {"root": "K0", "gates": {
    "K0": {"type": "AND", "inputs": ["X1", "K1"]},
    "K1": {"type": "OR", "inputs": ["X2", "K2"]},
    "K2": {"type": "AND", "inputs": ["X8", "X9", "X10"]}}}
losses = []
for g in (False, True):
    for k in (False, True):
        losses.append({"outcomes": {"Z0": False, "G0": g, "K0": k}, "consequence": f"Loss{len(losses) + 1}"})
losses.append({"outcomes": {"Z0": True}, "consequence": "Loss5"})
et_model["event_trees"] = {"T0": {
    "initiating_event": {"id": "T0", "frequency": 0.1},
    "branch_points": [{"id": "Z0", "event": "Z0"}, {"id": "G0", "fault_tree": "G0"},
                      {"id": "K0", "fault_tree": "K0"}],
    "sequences": losses,
    "shared_sources": ["X1", "X2"]}}
json.dump(et_model, open("models/event_tree.json", "w"), indent=2)

# cold standby: train G3 (X5, X6, X7) only starts failing once train G2 (X2, X3, X4) is down
standby_rates = {"X1": 0.0005, "X2": 0.002, "X3": 0.001, "X4": 0.0015,
                 "X5": 0.002, "X6": 0.001, "X7": 0.0005}
standby = {"format_version": 1,
           "mission_time": 1000.0,
           "time_grid": [50.0 * i for i in range(1, 21)],
           "basic_events": {e: {"failure_rate": r} for e, r in standby_rates.items()},
           "fault_trees": {"G0": g0}}
json.dump(standby, open("models/standby.json", "w"), indent=2)
coupling = {"couplings": [{"kind": "enable", "place": "G2.E", "transition": "G3.F"}]}
json.dump(coupling, open("models/standby_coupling.json", "w"), indent=2)
