"""Regenerate the bundled fixture corpus: sites, queries, scripted backends, config.

    python corpus/make_corpus.py

Every scripted reply is derived by replaying the planned paths through the
simulator, so fingerprints in the scripts always agree with the site files.
The corpus is built to exercise each curation stage:

* clean successes that rejection sampling keeps;
* detours (``shop-02``, ``lib-03``, ``tr-02``) that still reach the answer but
  are rejected by the judge for their length, so reflection adds them;
* wrong answers (``shop-03``, ``lib-02``, ``tr-03``) that branching repairs;
* dead-end pages on every site for rollback detours.

Agent replies are keyed on (query, step, fingerprint) without a task, so the
policy and the first proposal of the branching search share them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "src"))

from trajforge.env import site_from_dict, step as env_step  # noqa: E402
from trajforge.env import reset as env_reset  # noqa: E402
from trajforge.model import QueryRecord, Thought  # noqa: E402
from trajforge.protocol import parse_action, render_agent_reply  # noqa: E402

ROLE_OF = {
    "link": "clickable",
    "button": "clickable",
    "searchbox": "typable",
    "textbox": "typable",
    "StaticText": "static",
    "heading": "static",
}


def page(title, items, scroll=None, alt=None):
    return {"title": title, "items": items, "scroll": scroll or {}, "alt": alt}


def render_tree(title, items):
    lines = [f"RootWebArea '{title}' focused: True"]
    lines += [f"\t[{i}] {role} '{label}'" for i, role, label in items]
    return "\n".join(lines)


def site_json(site_id, start, pages, transitions, success):
    out_pages = {}
    for pid, p in pages.items():
        out_pages[pid] = {
            "tree": render_tree(p["title"], p["items"]),
            "elements": {str(i): ROLE_OF[role] for i, role, _ in p["items"]},
            "scroll": p["scroll"],
        }
    trs = [{"from": a, "action": act, "to": b} for a, act, b in transitions]
    for pid, p in pages.items():
        if any(i == 99 for i, _, _ in p["items"]):
            trs.append({"from": pid, "action": "click [99]", "to": "help"})
    return {"site_id": site_id, "start_page": start, "pages": out_pages, "transitions": trs, "success": success}


HELP = [(99, "link", "Help Center")]

# --- sites -------------------------------------------------------------------

SHOP = dict(
    site_id="shop",
    start="home",
    pages={
        "home": page(
            "ShopRight Home",
            [(1, "link", "Electronics"), (2, "link", "Books"), (3, "searchbox", "Search products"), (4, "link", "Today's Deals"), *HELP],
            alt=("Maybe today's deals list the item with its price.", "click [4]"),
        ),
        "electronics": page(
            "Electronics",
            [(6, "link", "Laptops"), (7, "link", "Phones"), (8, "link", "Accessories"), (20, "StaticText", "Showing 3 of 4 categories"), *HELP],
            scroll={"down": "electronics_more"},
            alt=("More categories may be further down the list.", "scroll [down]"),
        ),
        "electronics_more": page(
            "Electronics",
            [(9, "link", "Cameras"), (21, "StaticText", "Showing 4 of 4 categories"), *HELP],
            scroll={"up": "electronics"},
            alt=("The help center might explain where to find products.", "click [99]"),
        ),
        "cameras": page("Cameras", [(22, "link", "Lumo Cam"), (37, "StaticText", "1 result"), *HELP],
                        alt=("The help center may have product information.", "click [99]")),
        "laptops": page(
            "Laptops",
            [(10, "link", "Aria 14"), (15, "link", "Aria 14 (see details)"), (23, "StaticText", "Aria 14 laptop from $899"), *HELP],
            alt=("The details link should open the product page.", "click [15]"),
        ),
        "aria14": page("Aria 14", [(24, "heading", "Aria 14"), (25, "StaticText", "Price: $899"), (26, "StaticText", "Battery life: 12 hours"), *HELP]),
        "phones": page("Phones", [(11, "link", "Nimbus X"), (38, "StaticText", "Nimbus X from $599"), *HELP],
                       alt=("Support pages sometimes list phone specifications.", "click [99]")),
        "nimbus": page("Nimbus X", [(27, "heading", "Nimbus X"), (28, "StaticText", "Price: $599"), (29, "StaticText", "Storage: 256 GB"), *HELP]),
        "accessories": page("Accessories", [(30, "StaticText", "Chargers, cables and cases"), (31, "link", "USB-C charger"), *HELP]),
        "charger": page("USB-C charger", [(39, "StaticText", "Price: $19")]),
        "books": page("Books", [(12, "link", "Fiction"), (13, "link", "Science"), *HELP],
                      alt=("The help center could point to a book finder.", "click [99]")),
        "fiction": page("Fiction", [(32, "StaticText", "Bestsellers: The Quiet Harbor by M. Ode"), *HELP]),
        "science": page("Science", [(33, "StaticText", "Cosmos Unveiled by L. Hart, $24"), *HELP]),
        "results_cam": page("Search results", [(34, "link", "Lumo Cam"), (40, "StaticText", "1 result for your search"), *HELP],
                            alt=("The help center may explain search results.", "click [99]")),
        "lumo": page("Lumo Cam", [(35, "heading", "Lumo Cam"), (36, "StaticText", "Price: $349"), *HELP]),
        "deals": page("Today's Deals", [(41, "StaticText", "No deals are running today.")]),
        "help": page("ShopRight Help Center", [(90, "StaticText", "Contact support for order issues.")]),
    },
    transitions=[
        ("home", "click [1]", "electronics"),
        ("home", "click [2]", "books"),
        ("home", "click [4]", "deals"),
        ("home", "type [3] [*Cam*]", "results_cam"),
        ("electronics", "click [6]", "laptops"),
        ("electronics", "click [7]", "phones"),
        ("electronics", "click [8]", "accessories"),
        ("electronics_more", "click [9]", "cameras"),
        ("cameras", "click [22]", "lumo"),
        ("laptops", "click [10]", "aria14"),
        ("laptops", "click [15]", "aria14"),
        ("phones", "click [11]", "nimbus"),
        ("accessories", "click [31]", "charger"),
        ("books", "click [12]", "fiction"),
        ("books", "click [13]", "science"),
        ("results_cam", "click [34]", "lumo"),
    ],
    success={
        "shop-01": {"final_pages": ["aria14"], "answer_contains": ["899"]},
        "shop-02": {"final_pages": ["nimbus"], "answer_contains": ["256"]},
        "shop-03": {"final_pages": ["science"], "answer_contains": ["Hart"]},
        "shop-04": {"final_pages": ["lumo"], "answer_contains": ["349"]},
    },
)

LIBRARY = dict(
    site_id="library",
    start="home",
    pages={
        "home": page(
            "City Library",
            [(1, "searchbox", "Search the catalog"), (2, "link", "Opening Hours"), (3, "link", "Events"), (4, "link", "Browse Subjects"), (99, "link", "Ask a Librarian")],
            alt=("A librarian could answer this directly.", "click [99]"),
        ),
        "hours": page("Opening Hours", [(10, "StaticText", "Mon-Fri 9:00-20:00"), (11, "StaticText", "Sat 10:00-16:00"), (12, "StaticText", "Sun closed")]),
        "events": page(
            "Events",
            [(13, "link", "Author talk: R. Vance"), (14, "link", "Kids story hour"), (99, "link", "Ask a Librarian")],
            scroll={"down": "events_more"},
            alt=("The story hour page might list other clubs.", "click [14]"),
        ),
        "events_more": page("Events", [(15, "link", "Chess club"), (99, "link", "Ask a Librarian")], scroll={"up": "events"},
                            alt=("A librarian would know the club schedule.", "click [99]")),
        "vance": page("Author talk", [(16, "StaticText", "Author talk with R. Vance on March 14 at 18:00 in Room B")]),
        "story": page("Kids story hour", [(18, "StaticText", "Story hour, Saturdays at 11:00")]),
        "chess": page("Chess club", [(17, "StaticText", "Chess club meets Thursdays at 17:00")]),
        "subjects": page("Browse Subjects", [(5, "link", "History"), (6, "link", "Computing"), (99, "link", "Ask a Librarian")],
                         alt=("History might include a section on programming.", "click [5]")),
        "history": page("History", [(19, "link", "The Iron Road"), (99, "link", "Ask a Librarian")]),
        "computing": page("Computing", [(20, "link", "Learning Rust"), (99, "link", "Ask a Librarian")],
                          alt=("Asking a librarian may be quicker.", "click [99]")),
        "ironroad": page("The Iron Road", [(24, "heading", "The Iron Road"), (25, "StaticText", "Status: on loan, due April 2")]),
        "rust": page("Learning Rust", [(26, "heading", "Learning Rust"), (27, "StaticText", "Status: available, shelf C4")]),
        "results_rust": page("Catalog results", [(21, "link", "Learning Rust"), (99, "link", "Ask a Librarian")]),
        "results_iron": page("Catalog results", [(22, "link", "The Iron Road"), (99, "link", "Ask a Librarian")],
                             alt=("A librarian could confirm the due date.", "click [99]")),
        "help": page("Ask a Librarian", [(90, "StaticText", "Librarians answer questions by email within two days.")]),
    },
    transitions=[
        ("home", "click [2]", "hours"),
        ("home", "click [3]", "events"),
        ("home", "click [4]", "subjects"),
        ("home", "type [1] [*Rust*]", "results_rust"),
        ("home", "type [1] [*Iron*]", "results_iron"),
        ("events", "click [13]", "vance"),
        ("events", "click [14]", "story"),
        ("events_more", "click [15]", "chess"),
        ("subjects", "click [5]", "history"),
        ("subjects", "click [6]", "computing"),
        ("history", "click [19]", "ironroad"),
        ("computing", "click [20]", "rust"),
        ("results_rust", "click [21]", "rust"),
        ("results_iron", "click [22]", "ironroad"),
    ],
    success={
        "lib-01": {"final_pages": ["hours"], "answer_contains": ["10:00", "16:00"]},
        "lib-02": {"final_pages": ["chess"], "answer_contains": ["Thursday"]},
        "lib-03": {"final_pages": ["rust"], "answer_contains": ["available"]},
        "lib-04": {"final_pages": ["ironroad"], "answer_contains": ["April 2"]},
    },
)

TRANSIT = dict(
    site_id="transit",
    start="home",
    pages={
        "home": page(
            "MetroLink",
            [(1, "link", "Routes"), (2, "link", "Fares"), (3, "textbox", "Trip planner: destination"), (4, "link", "Service alerts"), (99, "link", "Contact us")],
            alt=("Service alerts might mention this.", "click [4]"),
        ),
        "routes": page("Routes", [(5, "link", "Line A"), (6, "link", "Line B"), (99, "link", "Contact us")], scroll={"down": "routes_more"},
                       alt=("Line B might share the schedule.", "click [6]")),
        "routes_more": page("Routes", [(7, "link", "Night bus N1"), (99, "link", "Contact us")], scroll={"up": "routes"},
                            alt=("Customer service could tell me the hours.", "click [99]")),
        "linea": page("Line A", [(10, "StaticText", "Line A: Central - Airport, every 10 min"), (11, "link", "Line A timetable"), (99, "link", "Contact us")],
                      alt=("Customer service can confirm the timetable.", "click [99]")),
        "linea_tt": page("Line A timetable", [(20, "StaticText", "First train 05:30, last train 23:45")]),
        "lineb": page("Line B", [(12, "StaticText", "Line B: Harbor - University, every 15 min"), (99, "link", "Contact us")]),
        "n1": page("Night bus N1", [(13, "StaticText", "N1 runs 00:30-04:30 every 30 min")]),
        "fares": page("Fares", [(14, "StaticText", "Single ticket $2.50"), (15, "link", "Passes"), (99, "link", "Contact us")],
                      alt=("Customer service may quote pass prices.", "click [99]")),
        "passes": page("Passes", [(16, "StaticText", "Monthly pass $75"), (17, "StaticText", "Weekly pass $22")]),
        "alerts": page("Service alerts", [(18, "StaticText", "Line B closed for maintenance on Sunday")]),
        "trip_airport": page("Trip planner", [(19, "StaticText", "Take Line A from Central, 28 minutes")]),
        "help": page("Contact us", [(90, "StaticText", "Call 555-0100 for customer service.")]),
    },
    transitions=[
        ("home", "click [1]", "routes"),
        ("home", "click [2]", "fares"),
        ("home", "click [4]", "alerts"),
        ("home", "type [3] [*Airport*]", "trip_airport"),
        ("routes", "click [5]", "linea"),
        ("routes", "click [6]", "lineb"),
        ("routes_more", "click [7]", "n1"),
        ("linea", "click [11]", "linea_tt"),
        ("fares", "click [15]", "passes"),
    ],
    success={
        "tr-01": {"final_pages": ["passes"], "answer_contains": ["75"]},
        "tr-02": {"final_pages": ["linea_tt"], "answer_contains": ["23:45"]},
        "tr-03": {"final_pages": ["n1"], "answer_contains": ["00:30"]},
        "tr-04": {"final_pages": ["trip_airport"], "answer_contains": ["28"]},
        "tr-05": {"final_pages": ["fares"], "answer_contains": ["$9"]},
    },
)

SITES = [SHOP, LIBRARY, TRANSIT]

# --- queries -----------------------------------------------------------------
# policy: the self-rollout path. branch: the MPC path; ``rivals`` maps a step
# index of the branch path to losing candidates (thought, action, score).
# judge: accepted answer, and optionally a length the judge rejects as wasteful.
# A thought of None marks a malformed first reply that is fixed on reprompt.

QUERIES = [
    dict(
        id="shop-01", site="shop", text="What is the price of the Aria 14 laptop?", answer="$899",
        policy=[
            ("Laptops are sold under Electronics.", "click [1]"),
            ("The Laptops category should list the Aria 14.", "click [6]"),
            ("The Aria 14 link opens its product page.", "click [10]"),
            ("The product page shows the price.", "stop [$899]"),
        ],
        rivals={0: [("Books will not have laptops, but the catalog may be shared.", "click [2]", 0.1)]},
    ),
    dict(
        id="shop-02", site="shop", text="How much storage does the Nimbus X phone have?", answer="256 GB", reject_length=6,
        policy=[
            ("Phones are under Electronics.", "click [1]"),
            ("Accessories may include phone listings.", "click [8]"),
            ("Only chargers and cables here. Going back to the categories.", "goback"),
            ("The Phones category is the right one.", "click [7]"),
            ("Open the Nimbus X page.", "click [11]"),
            ("The specifications list the storage.", "stop [256 GB]"),
        ],
        branch=[
            ("Phones are under Electronics.", "click [1]"),
            ("The Phones category lists handsets directly.", "click [7]"),
            ("Open the Nimbus X page.", "click [11]"),
            ("The specifications list the storage.", "stop [256 GB]"),
        ],
    ),
    dict(
        id="shop-03", site="shop", text="Who is the author of the book Cosmos Unveiled?", answer="L. Hart",
        policy=[
            ("Books are in their own section.", "click [2]"),
            ("Fiction is the largest category, the book may be there.", "click [12]"),
            ("The bestseller list does not mention it.", "stop [The book is not listed]"),
        ],
        branch=[
            ("Books are in their own section.", "click [2]"),
            ("The title sounds like popular science, so check Science.", "click [13]"),
            ("Science lists Cosmos Unveiled with its author.", "stop [L. Hart]"),
        ],
    ),
    dict(
        id="shop-04", site="shop", text="Find the price of the Lumo Cam camera.", answer="$349",
        policy=[
            ("Cameras should be under Electronics.", "click [1]"),
            ("Cameras are not visible yet; scroll for more categories.", "scroll [down]"),
            ("Open the Cameras category.", "click [9]"),
            ("Open the Lumo Cam product.", "click [22]"),
            ("The price is shown.", "stop [$349]"),
        ],
        branch=[
            ("Searching for the product name is the quickest route.", "type [3] [Lumo Cam] [1]"),
            ("The search found the Lumo Cam.", "click [34]"),
            ("The price is shown.", "stop [$349]"),
        ],
    ),
    dict(
        id="lib-01", site="library", text="What are the library's opening hours on Saturday?", answer="10:00-16:00",
        policy=[
            ("Opening hours have their own page.", "click [2]"),
            ("Saturday hours are listed.", "stop [10:00-16:00]"),
        ],
    ),
    dict(
        id="lib-02", site="library", text="On which day does the chess club meet?", answer="Thursdays at 17:00",
        policy=[
            ("Clubs are announced under Events.", "click [3]"),
            ("No chess club among the events shown.", "stop [There is no chess club]"),
        ],
        branch=[
            ("Clubs are announced under Events.", "click [3]"),
            ("More events may be listed further down.", "scroll [down]"),
            ("The chess club entry is here.", "click [15]"),
            ("The schedule is shown.", "stop [Thursdays at 17:00]"),
        ],
        rivals={1: [("The author talk page could mention other events.", "click [13]", 0.2)]},
    ),
    dict(
        id="lib-03", site="library", text="Is the book Learning Rust available to borrow?", answer="available, shelf C4", reject_length=6,
        policy=[
            ("Browse the catalog by subject.", "click [4]"),
            ("History is the first subject; try it.", "click [5]"),
            ("History has no programming books. Go back.", "goback"),
            ("Computing is the right subject.", "click [6]"),
            ("Open Learning Rust.", "click [20]"),
            ("The loan status is shown.", "stop [available, shelf C4]"),
        ],
        branch=[
            ("Search the catalog for the title.", "type [1] [Learning Rust] [1]"),
            ("Open the matching record.", "click [21]"),
            ("The loan status is shown.", "stop [available, shelf C4]"),
        ],
    ),
    dict(
        id="lib-04", site="library", text="When is The Iron Road due back?", answer="April 2",
        policy=[
            ("Search the catalog for the title.", "type [1] [The Iron Road] [1]"),
            ("Open the matching record.", "click [22]"),
            ("The due date is shown.", "stop [April 2]"),
        ],
    ),
    dict(
        id="tr-01", site="transit", text="How much is a monthly pass?", answer="$75",
        policy=[
            ("Pass prices are under Fares.", "click [2]"),
            ("Open the Passes page.", "click [15]"),
            ("The monthly pass price is listed.", "stop [$75]"),
        ],
    ),
    dict(
        id="tr-02", site="transit", text="When does the last Line A train run?", answer="23:45", reject_length=6,
        policy=[
            ("Timetables are under Routes.", "click [1]"),
            ("Check Line B first.", "click [6]"),
            ("This is Line B. Go back.", "goback"),
            ("Open Line A.", "click [5]"),
            ("Open the timetable.", "click [11]"),
            ("The last train is listed.", "stop [23:45]"),
        ],
        branch=[
            ("Timetables are under Routes.", "click [1]"),
            ("Open Line A directly.", "click [5]"),
            ("Open the timetable.", "click [11]"),
            ("The last train is listed.", "stop [23:45]"),
        ],
    ),
    dict(
        id="tr-03", site="transit", text="What hours does the night bus N1 run?", answer="00:30-04:30",
        policy=[
            ("Bus lines are listed under Routes.", "click [1]"),
            ("Only day lines are shown.", "stop [There is no night service]"),
        ],
        branch=[
            ("Bus lines are listed under Routes.", "click [1]"),
            ("Night services may be further down the list.", "scroll [down]"),
            ("Open the N1 page.", "click [7]"),
            ("The operating hours are listed.", "stop [00:30-04:30]"),
        ],
    ),
    dict(
        id="tr-04", site="transit", text="How long does the trip to the Airport take?", answer="28 minutes",
        policy=[
            ("Use the trip planner.", "type [3] [Airport] [1]"),
            ("The trip time is shown.", "stop [28 minutes]"),
        ],
    ),
    dict(
        id="tr-05", site="transit", text="What is the fare for the airport express?", answer=None,
        policy=[
            (None, "click [2]"),
            ("Only a single ticket price is listed.", "stop [$2.50]"),
        ],
    ),
]


# --- script synthesis --------------------------------------------------------


def tree_summary(site, obs_text):
    labels = [ln.split("'")[1] for ln in obs_text.splitlines()[1:] if "'" in ln]
    return ", ".join(labels[:3])


def title_of(obs_text):
    return obs_text.splitlines()[0].split("'")[1]


def agent_reply(thought, action):
    return render_agent_reply(Thought(thought), parse_action(action))


class Scripts:
    def __init__(self):
        self.roles = {r: [] for r in ("policy", "proposer", "verbalizer", "simulator", "scorer", "judge")}
        self.agent: dict[tuple, str] = {}
        self.sims: set[tuple] = set()

    def add(self, role, match, reply, tokens=None):
        e = {"match": match, "reply": reply}
        if tokens is not None:
            e["tokens"] = tokens
        self.roles[role].append(e)

    def add_agent(self, qid, step, fp, thought, action):
        key = (qid, step, fp)
        if key in self.agent:
            return
        self.agent[key] = action
        match = {"query_id": qid, "step": step, "fingerprint": fp}
        if thought is None:
            bad = f"I should open {action} next."
            for role in ("policy", "proposer"):
                self.add(role, match, bad)
                self.add(role, {**match, "retry": 1}, agent_reply("Fares are listed on their own page.", action))
            return
        for role in ("policy", "proposer"):
            self.add(role, match, agent_reply(thought, action))

    def add_sim(self, site, state, obs, action):
        key = (obs.fingerprint, action)
        if key in self.sims:
            return
        self.sims.add(key)
        _, nxt = env_step(site, state, parse_action(action))
        first = f"The page changes to '{title_of(nxt.tree_text)}'." if nxt.fingerprint != obs.fingerprint else "The page stays the same."
        second = f"It would show: {tree_summary(site, nxt.tree_text)}."
        base = {"task": "simulate", "fingerprint": obs.fingerprint, "action": action}
        self.add("simulator", {**base, "depth": 1}, first)
        self.add("simulator", {**base, "depth": 2}, second)


def walk(site, q, plan):
    state, obs = env_reset(site, q)
    out = []
    for t, (thought, action) in enumerate(plan):
        out.append((t, state, obs, thought, action))
        state, obs = env_step(site, state, parse_action(action))
    return out


def build(out_dir: Path):
    sites = {}
    (out_dir / "sites").mkdir(parents=True, exist_ok=True)
    (out_dir / "scripts").mkdir(parents=True, exist_ok=True)
    for s in SITES:
        d = site_json(s["site_id"], s["start"], s["pages"], s["transitions"], s["success"])
        (out_dir / "sites" / f"{s['site_id']}.json").write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")
        sites[s["site_id"]] = (site_from_dict(d), s)

    sc = Scripts()
    queries = []
    for qd in QUERIES:
        site, _ = sites[qd["site"]]
        q = QueryRecord(qd["id"], qd["text"], qd["site"])
        queries.append({"query_id": q.query_id, "query_text": q.query_text, "site": q.site})
        for t, state, obs, thought, action in walk(site, q, qd["policy"]):
            sc.add_agent(q.query_id, t + 1, obs.fingerprint, thought, action)

        branch = qd.get("branch", qd["policy"])
        rivals = qd.get("rivals", {})
        for t, state, obs, thought, action in walk(site, q, branch):
            key = (q.query_id, t + 1, obs.fingerprint)
            first = sc.agent.get(key)
            cands = []
            if first is None:
                sc.add_agent(*key, thought, action)
                cands.append((action, 0.9))
            elif first == action:
                cands.append((action, 0.9))
            else:
                cands += [(first, 0.3), (action, 0.9)]
                sc.add("proposer", {"task": "propose", "candidate": 2, "query_id": q.query_id, "step": t + 1, "fingerprint": obs.fingerprint},
                       agent_reply(thought, action))
            for r_thought, r_action, r_score in rivals.get(t, []):
                n = len(cands) + 1
                sc.add("proposer", {"task": "propose", "candidate": n, "query_id": q.query_id, "step": t + 1, "fingerprint": obs.fingerprint},
                       agent_reply(r_thought, r_action))
                cands.append((r_action, r_score))
            for act, score in cands:
                sc.add_sim(site, state, obs, act)
                verdict = "leads directly toward the objective" if score >= 0.5 else "is unlikely to help with the objective"
                sc.add("scorer", {"task": "score", "query_id": q.query_id, "fingerprint": obs.fingerprint, "action": act},
                       f"Thought: The predicted page {verdict}. Score: {score}")

        # judge: accepts the right answer unless the trajectory is wastefully long
        if qd["answer"] is not None:
            sc.add("judge", {"task": "judge", "query_id": q.query_id, "answer": qd["answer"]},
                   "The final page confirms the response and the actions are appropriate. Verdict: SUCCESS")
        if "reject_length" in qd:
            sc.add("judge", {"task": "judge", "query_id": q.query_id, "answer": qd["answer"], "length": qd["reject_length"]},
                   "The answer is right but the agent wandered through irrelevant pages before finding it. Verdict: NOT SUCCESS")

        # lookahead thoughts keyed on the action they justify
        seen = set()
        for thought, action in [*qd["policy"], *branch]:
            if action in seen or thought is None:
                continue
            seen.add(action)
            tail = (
                "With the answer on screen the task can end here."
                if action.startswith("stop")
                else "Looking ahead, this leads straight toward the answer without revisiting earlier pages."
            )
            sc.add("verbalizer", {"task": "verbalize_lookahead", "query_id": q.query_id, "action": action}, f"{thought} {tail}")

        # rollback detours: outranks the shared agent entry for the same page
        for pid, p in sites[qd["site"]][1]["pages"].items():
            if p["alt"]:
                sc.add("proposer", {"task": "alternative", "query_id": q.query_id, "fingerprint": site.observe(pid).fingerprint, "attempt": 0},
                       agent_reply(*p["alt"]))

        # off-track verdicts for every page of the site, from reachability
        for pid in site.pages:
            fp = site.observe(pid).fingerprint
            verdict = "ON TRACK" if site.on_success_path(q.query_id, pid) else "OFF TRACK"
            sc.add("judge", {"task": "off_track", "query_id": q.query_id, "fingerprint": fp}, f"Verdict: {verdict}")

    # recovery thoughts for dead-end pages
    for site, spec in sites.values():
        for pid, p in spec["pages"].items():
            fp = site.observe(pid).fingerprint
            if not site.successors(pid):
                sc.add("verbalizer", {"task": "goback", "fingerprint": fp},
                       agent_reply(f"The '{p['title']}' page has nothing that leads toward the objective. Return to the previous page and take the other route.", "goback"))

    # fallbacks
    sc.add("proposer", {"task": "alternative"}, agent_reply("Starting over from the homepage may reveal another route.", "restart"))
    sc.add("verbalizer", {"task": "goback"}, agent_reply("This page does not help with the objective. Go back to the previous page.", "goback"))
    sc.add("verbalizer", {"task": "verbalize_lookahead"}, "This step moves the task forward toward the answer.")
    sc.add("simulator", {"task": "simulate"}, "The page will likely update in response to the action.")
    sc.add("scorer", {"task": "score"}, "Thought: The effect of this action on the objective is unclear. Score: 0.4")
    sc.add("judge", {"task": "judge"}, "The response does not satisfy the objective. Verdict: NOT SUCCESS")
    sc.add("judge", {"task": "off_track"}, "Verdict: ON TRACK")

    with open(out_dir / "queries.jsonl", "w", encoding="utf-8") as fh:
        for rec in queries:
            fh.write(json.dumps(rec) + "\n")
    for role, entries in sc.roles.items():
        with open(out_dir / "scripts" / f"{role}.jsonl", "w", encoding="utf-8") as fh:
            for e in entries:
                fh.write(json.dumps(e, ensure_ascii=False) + "\n")

    config = {
        "sites_dir": "sites",
        "queries": "queries.jsonl",
        "output_dir": "out",
        "clip_k": 3,
        "max_steps": 15,
        "branch_k": 3,
        "sim_depth": 2,
        "rollback_n": 2,
        "rollback_mode": "continue",
        "seed": 42,
        "judge": "model_based",
        "backends": {role: {"kind": "scripted", "script": f"scripts/{role}.jsonl"} for role in sc.roles},
    }
    (out_dir / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return {role: len(e) for role, e in sc.roles.items()}


if __name__ == "__main__":
    counts = build(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE)
    print(json.dumps(counts))
