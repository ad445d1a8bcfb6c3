"""Offline fixture world: three scripted videos, question sets and mock scripts.

``drama`` and ``reef`` back the 20-question dataset. ``market`` is the
detail-loss video: its localisation questions ask about one-second events
that fall between the frames sampled for captioning, so only re-watching the
source at 1 fps can answer them.

Every frame carries a ``content`` record (scene, location, time of day,
events, objects, faces). The scripted vision mock reads it when a frame is
shown to the chat provider; face names only reach captions through detector
boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEATURE_DIM = 32


@dataclass
class Scene:
    start: float
    end: float
    name: str
    location: str
    time: str
    objects: tuple[str, ...] = ()


@dataclass
class VideoSpec:
    video_id: str
    title: str
    video_type: str
    duration: int
    scenes: list[Scene]
    events: list[tuple[float, float, str]]  # inclusive frame range
    objects: list[tuple[float, float, str]] = field(default_factory=list)
    faces: list[tuple[float, float, str, tuple]] = field(default_factory=list)
    transcript: list[tuple[float, float, str, str]] = field(default_factory=list)
    seed: int = 0


DRAMA = VideoSpec(
    "drama",
    "Crane Holdings, episode 3",
    "episode_movie",
    600,
    [
        Scene(0, 120, "bedroom", "Crane family bedroom", "early morning", ("unmade bed", "alarm clock")),
        Scene(120, 240, "terrace", "penthouse terrace", "late morning", ("ashtray", "city skyline")),
        Scene(240, 300, "helipad", "rooftop helipad", "midday", ("windsock",)),
        Scene(300, 420, "boardroom", "Crane Holdings boardroom", "afternoon", ("long table", "projector")),
        Scene(420, 601, "birthday party", "Crane family mansion ballroom", "evening", ("balloons", "champagne")),
    ],
    events=[
        (10, 40, "Kenny Crane wakes up"),
        (60, 100, "Kenny Crane reads the newspaper"),
        (125, 151, "Walter Crane smokes a cigarette"),
        (152, 152, "cigarette drops to the ground"),
        (170, 190, "Walter Crane checks his watch"),
        (250, 270, "helicopter lands"),
        (280, 290, "Walter Crane boards the helicopter"),
        (305, 415, "board members argue over the vote"),
        (430, 470, "birthday cake is served"),
        (480, 500, "Kenny Crane gives a toast"),
        (540, 559, "Walter Crane collapses"),
        (560, 580, "guests call an ambulance"),
    ],
    objects=[(200, 239, "headphones")],
    faces=[
        (10, 100, "Kenny Crane", (0.30, 0.20, 0.20, 0.30)),
        (125, 199, "Walter Crane (actor Ian Marsh)", (0.40, 0.15, 0.20, 0.30)),
        (339, 343, "Walter Crane (actor Ian Marsh)", (0.55, 0.20, 0.18, 0.28)),
        (480, 500, "Kenny Crane", (0.35, 0.25, 0.20, 0.30)),
    ],
    transcript=[
        (20, 25, "Kenny Crane", "Another board meeting today."),
        (130, 135, "Walter Crane", "I need some air before the helicopter arrives."),
        (262, 266, "Pilot", "We are cleared for the city."),
        (310, 316, "Board chair", "The vote is postponed until Walter arrives."),
        (485, 495, "Kenny Crane", "To my father, who built everything we have."),
        (562, 566, "Guest", "Somebody call an ambulance!"),
    ],
    seed=1,
)

REEF = VideoSpec(
    "reef",
    "Guardians of the Kalani Reef",
    "documentary",
    300,
    [
        Scene(0, 90, "coral reef", "Kalani Reef", "morning", ("coral", "camera housing")),
        Scene(90, 180, "research boat", "deck of the research boat", "noon", ("winch", "sensor cable")),
        Scene(180, 301, "lab", "marine biology lab", "afternoon", ("microscope", "sample jars")),
    ],
    events=[
        (40, 60, "diver photographs a sea turtle"),
        (75, 75, "a shark passes the camera"),
        (120, 135, "scientist lowers a sensor into the water"),
        (200, 230, "coral sample placed under the microscope"),
    ],
    faces=[(200, 230, "Dr. Amara Osei", (0.20, 0.20, 0.20, 0.30))],
    transcript=[
        (5, 10, "Narrator", "Welcome to the Kalani Reef."),
        (100, 106, "Narrator", "Back on the boat the team prepares its instruments."),
        (205, 210, "Dr. Amara Osei", "We check every coral sample for bleaching damage."),
        (250, 255, "Dr. Amara Osei", "Bleaching has spread faster this year."),
    ],
    seed=2,
)

MARKET = VideoSpec(
    "market",
    "A day at the harbour market",
    "vlog",
    240,
    [
        Scene(0, 80, "fish market", "harbour fish market", "early morning", ("ice trays", "scales")),
        Scene(80, 160, "street food stall", "street food stall", "late morning", ("griddle", "menu board")),
        Scene(160, 241, "harbour", "harbour pier", "afternoon", ("ferry", "bollards")),
    ],
    events=[
        (5, 70, "vendors shout prices"),
        (33, 33, "a vendor drops a crate of fish"),
        (90, 150, "the cook makes pancakes"),
        (117, 117, "the cook flips a pancake into the air"),
        (170, 235, "boats rock at the pier"),
        (201, 201, "a seagull snatches a sandwich"),
    ],
    transcript=[
        (10, 15, "Vlogger", "The market opens before sunrise."),
        (95, 100, "Vlogger", "These pancakes smell amazing."),
        (180, 185, "Vlogger", "Let's watch the boats for a while."),
    ],
    seed=3,
)

VIDEOS = {v.video_id: v for v in (DRAMA, REEF, MARKET)}


def _features(spec: VideoSpec) -> dict[int, list[float]]:
    rng = np.random.default_rng(spec.seed)
    out = {}
    for t in range(spec.duration + 1):
        j = next(i for i, s in enumerate(spec.scenes) if s.start <= t < s.end)
        vec = np.ones(FEATURE_DIM)
        vec[(4 * j) % FEATURE_DIM:(4 * j) % FEATURE_DIM + 4] += 10.0
        vec += rng.uniform(0, 0.2, FEATURE_DIM)
        out[t] = [round(float(v), 4) for v in vec]
    return out


def manifest(spec: VideoSpec) -> dict:
    feats = _features(spec)
    frames = []
    for t in range(spec.duration + 1):
        scene = next(s for s in spec.scenes if s.start <= t < s.end)
        content = {
            "scene": scene.name,
            "location": scene.location,
            "time": scene.time,
            "events": [text for a, b, text in spec.events if a <= t <= b],
            "objects": list(scene.objects) + [o for a, b, o in spec.objects if a <= t <= b],
        }
        rec = {"t": t, "feature": feats[t], "content": content}
        faces = [{"box": list(box), "label": label, "confidence": 0.97} for a, b, label, box in spec.faces if a <= t <= b]
        if faces:
            rec["annotations"] = faces
        frames.append(rec)
    return {
        "video_id": spec.video_id,
        "title": spec.title,
        "video_type": spec.video_type,
        "duration": spec.duration,
        "frames": frames,
        "transcript": [{"t0": a, "t1": b, "speaker": s, "text": x} for a, b, s, x in spec.transcript],
    }


# ---------------------------------------------------------------- questions

def _q(qid, video_id, category, question, truth, options=None):
    rec = {"qid": qid, "video_id": video_id, "category": category, "question": question, "ground_truth": truth}
    if options:
        rec["options"] = options
    return rec


SCENE_CHANGE_Q = "Are there any scene changes between 03:58 and 04:02, and what is their connection?"
ACTOR_Q = "Which other shows has the actor playing the man at 5 minutes and 41 seconds appeared in?"
CIGARETTE_Q = "When was the first time a cigarette dropped to the ground?"

QUESTIONS = [
    _q("d01", "drama", "reasoning", SCENE_CHANGE_Q, "c", {
        "a": "There is no scene change",
        "b": "The bedroom cuts to the terrace",
        "c": "The terrace cuts to the helipad, where the helicopter Walter was waiting for lands",
        "d": "The boardroom cuts to the birthday party",
    }),
    _q("d02", "drama", "external_knowledge", ACTOR_Q, "b, d", {
        "a": "Harbor Lights", "b": "The Long Winter", "c": "Silver Street", "d": "Northern Line",
    }),
    _q("d03", "drama", "event_localization", CIGARETTE_Q, "00:02:32"),
    _q("d04", "drama", "event_localization", "When does Walter Crane collapse at the party?", "[00:09:00, 00:09:19]"),
    _q("d05", "drama", "information_summary", "Where does the birthday party take place?", "b", {
        "a": "On the penthouse terrace", "b": "In the Crane family mansion ballroom",
        "c": "On the rooftop helipad", "d": "In a hotel lobby",
    }),
    _q("d06", "drama", "information_summary", "What does Kenny Crane say in his toast?", "a", {
        "a": "He thanks his father for building everything they have",
        "b": "He announces his engagement",
        "c": "He resigns from the company",
        "d": "He thanks the board for the vote",
    }),
    _q("d07", "drama", "reasoning", "Why is the board vote postponed?", "c", {
        "a": "The projector is broken", "b": "The board chair is ill",
        "c": "Walter has not arrived yet", "d": "The helicopter is late",
    }),
    _q("d08", "drama", "event_localization", "When does the helicopter land on the helipad?", "[00:04:10, 00:04:30]"),
    _q("d09", "drama", "event_localization", "When is the birthday cake served?", "[00:07:10, 00:07:50]"),
    _q("d10", "drama", "information_summary", "What time of day is it at 00:08:00?", "c", {
        "a": "Early morning", "b": "Midday", "c": "Evening", "d": "Late night",
    }),
    _q("d11", "drama", "reasoning", "What was Walter doing on the terrace before the helicopter arrived?", "a", {
        "a": "Smoking a cigarette", "b": "Reading the newspaper", "c": "Swimming", "d": "Making a phone call",
    }),
    _q("d12", "drama", "information_summary", "Which object is visible on the terrace around 00:03:30?", "a", {
        "a": "Headphones", "b": "An umbrella", "c": "A laptop", "d": "A guitar",
    }),
    _q("r01", "reef", "event_localization", "When does a shark pass the camera?", "00:01:15"),
    _q("r02", "reef", "event_localization", "When does the scientist lower the sensor into the water?", "[00:02:00, 00:02:15]"),
    _q("r03", "reef", "information_summary", "What is the diver photographing?", "d", {
        "a": "A manta ray", "b": "A shipwreck", "c": "An octopus", "d": "A sea turtle",
    }),
    _q("r04", "reef", "information_summary", "Who examines the coral samples in the lab?", "b", {
        "a": "The narrator", "b": "Dr. Amara Osei", "c": "The boat captain", "d": "A student volunteer",
    }),
    _q("r05", "reef", "reasoning", "Why is the coral sample placed under the microscope?", "a", {
        "a": "To check it for bleaching damage", "b": "To count the fish eggs",
        "c": "To measure the water temperature", "d": "To photograph it for a magazine",
    }),
    _q("r06", "reef", "external_knowledge", "In which ocean is the reef shown in the documentary located?", "a", {
        "a": "Pacific Ocean", "b": "Atlantic Ocean", "c": "Indian Ocean", "d": "Arctic Ocean",
    }),
    _q("r07", "reef", "reasoning", "Where does the team go after the dive?", "c", {
        "a": "To a beach bar", "b": "To the airport", "c": "To the research boat", "d": "To a fish market",
    }),
    _q("r08", "reef", "event_localization", "When is coral bleaching first mentioned?", ["00:03:25", "00:04:10"]),
]

DETAIL_QUESTIONS = [
    _q("m01", "market", "event_localization", "When does a vendor drop a crate of fish?", "00:00:33"),
    _q("m02", "market", "event_localization", "When does the cook flip a pancake into the air?", "00:01:57"),
    _q("m03", "market", "event_localization", "When does a seagull snatch a sandwich?", "00:03:21"),
    _q("m04", "market", "event_localization", "When does the vlogger visit the street food stall?", "[00:01:20, 00:02:40]"),
]


# ------------------------------------------------------------ chat script

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _localize(match: str, segment: str, detail: str, skill: str = "first_time", instruction: str | None = None) -> list[dict]:
    """Rewind the segment whose caption mentions ``segment`` and locate ``detail`` there."""
    return [
        {
            "purpose": "conqueror",
            "match": match,
            "skill": "segment_of",
            "args": {"needle": segment},
            "reply": {"type": "requires_tool", "tool": {"name": "rewinder", "args": {
                "t0": "{result.start}", "t1": "{result.end}",
                "instruction": instruction or f"Find the moment when this happens: {detail}",
            }}},
        },
        {"purpose": "synthesis", "match": match, "skill": skill, "args": {"needle": detail}},
        {"purpose": "answer", "match": match, "skill": skill, "args": {"needle": detail}},
    ]


def _choice(match: str, options: dict, within: str | None = None) -> list[dict]:
    args = {"options": options}
    if within:
        args["within"] = within
    return [
        {"purpose": "conqueror", "match": match, "skill": "choose", "args": args,
         "reply": {"type": "direct_answer", "answer": "{result}"}},
        {"purpose": "answer", "match": match, "skill": "choose", "args": args},
    ]


SCENE_CHANGE_OPTIONS = {
    "a": "No scene change observed",
    "b": "bedroom -> terrace",
    "c": "terrace -> helipad",
    "d": "boardroom -> birthday party",
}
ACTOR_OPTIONS = {"a": "Harbor Lights", "b": "The Long Winter", "c": "Silver Street", "d": "Northern Line"}
OCEAN_OPTIONS = {"a": "Pacific Ocean", "b": "Atlantic Ocean", "c": "Indian Ocean", "d": "Arctic Ocean"}


def chat_script() -> dict:
    rules: list[dict] = []
    # Scene change: split into extract / analyse / connect, rewinding the asked span.
    rules += [
        {"purpose": "conqueror", "match": r"^Are there any scene changes between",
         "reply": {"type": "too_complex", "reason": "needs frame extraction, change detection and linking the scenes"}},
        {"purpose": "divider", "match": r"^Are there any scene changes between (?P<a>\S+) and (?P<b>[^\s,]+)",
         "reply": {"success": True, "tasks": [
             "Extract frames between {a} and {b}",
             "Analyze the extracted frames to identify any scene changes",
             "Determine the connection between the scenes before and after the change",
         ]}},
        {"purpose": "conqueror", "match": r"^Extract frames between (?P<a>\S+) and (?P<b>\S+)$",
         "reply": {"type": "requires_tool", "tool": {"name": "rewinder", "args": {
             "t0": "{a}", "t1": "{b}", "instruction": "Describe every frame and report scene changes"}}}},
        {"purpose": "conqueror", "match": r"^Analyze the extracted frames to identify any scene changes",
         "skill": "grep", "args": {"needle": "scene change"},
         "reply": {"type": "direct_answer", "answer": "{result}"}},
        {"purpose": "conqueror", "match": r"^Determine the connection between the scenes",
         "skill": "choose", "args": {"options": SCENE_CHANGE_OPTIONS},
         "reply": {"type": "direct_answer", "answer": "{result}"}},
        {"purpose": "answer", "match": r"^Are there any scene changes between",
         "skill": "choose", "args": {"options": SCENE_CHANGE_OPTIONS}},
    ]
    # Actor lookup: identify the face, search the web, match the options.
    rules += [
        {"purpose": "conqueror", "match": r"^Which other shows has the actor",
         "reply": {"type": "too_complex", "reason": "needs the identity of the person, then outside knowledge"}},
        {"purpose": "divider", "match": r"^Which other shows has the actor",
         "reply": {"success": True, "tasks": [
             "Identify the individual at 00:05:41 in the video",
             "Search the internet for the filmography of the identified actor",
             "Select the options listing the actor's other shows",
         ]}},
        {"purpose": "conqueror", "match": r"^Identify the individual at (?P<t>\S+) in the video",
         # A zero-length span; the rescuer widens it to one second.
         "reply": {"type": "requires_tool", "tool": {"name": "rewinder", "args": {
             "t0": "{t}", "t1": "{t}", "instruction": "Who appears in these frames?"}}}},
        {"purpose": "conqueror", "match": r"^Search the internet for the filmography",
         "skill": "extract", "args": {"pattern": r"\(actor ([^)]+)\)"},
         "reply": {"type": "requires_tool", "tool": {"name": "web_search", "args": {"query": "{result} filmography"}}}},
        {"purpose": "conqueror", "match": r"^Select the options listing",
         "skill": "choose", "args": {"options": ACTOR_OPTIONS},
         "reply": {"type": "direct_answer", "answer": "{result}"}},
        {"purpose": "answer", "match": r"^Which other shows has the actor",
         "skill": "choose", "args": {"options": ACTOR_OPTIONS}},
    ]
    # Ocean of the reef: search on the name heard in the narration.
    rules += [
        {"purpose": "conqueror", "match": r"^In which ocean is the reef",
         "skill": "extract", "args": {"pattern": r"Welcome to the ([A-Z]\w+ Reef)"},
         "reply": {"type": "requires_tool", "tool": {"name": "web_search", "args": {"query": "{result} location"}}}},
        {"purpose": "synthesis", "match": r"^In which ocean is the reef", "skill": "choose", "args": {"options": OCEAN_OPTIONS}},
        {"purpose": "answer", "match": r"^In which ocean is the reef", "skill": "choose", "args": {"options": OCEAN_OPTIONS}},
    ]
    rules += _localize(r"^When was the first time a cigarette dropped", "cigarette", "cigarette drops")
    rules += _localize(r"^When does Walter Crane collapse", "collapses", "collapses", "span")
    rules += _localize(r"^When does the helicopter land", "helicopter lands", "helicopter lands", "span")
    rules += _localize(r"^When is the birthday cake served", "cake", "cake is served", "span")
    rules += _localize(r"^When does a shark pass", "coral reef", "shark passes")
    rules += _localize(r"^When does the scientist lower the sensor", "sensor", "lowers a sensor", "span")
    rules += _localize(r"^When is coral bleaching first mentioned", "bleaching", "bleaching")
    rules += _localize(r"^When does a vendor drop a crate", "fish market", "drops a crate")
    rules += _localize(r"^When does the cook flip a pancake", "pancakes", "flips a pancake")
    rules += _localize(r"^When does a seagull snatch", "harbour pier", "seagull")
    rules += _localize(r"^When does the vlogger visit the street food stall", "street food stall", "street food stall", "span")
    rules += _choice(r"^Where does the birthday party take place", {
        "a": "penthouse terrace", "b": "mansion ballroom", "c": "rooftop helipad", "d": "hotel lobby"}, within="birthday")
    rules += _choice(r"^What does Kenny Crane say in his toast", {
        "a": "who built everything we have", "b": "engaged", "c": "resign", "d": "thank the board"})
    rules += _choice(r"^Why is the board vote postponed", {
        "a": "projector is broken", "b": "chair is ill", "c": "postponed until Walter arrives", "d": "helicopter is late"})
    rules += _choice(r"^What time of day is it at", {
        "a": "Time: early morning", "b": "Time: midday", "c": "Time: evening", "d": "Time: late night"})
    rules += _choice(r"^What was Walter doing on the terrace", {
        "a": "smokes a cigarette", "b": "reads the newspaper", "c": "swims", "d": "phone call"}, within="terrace")
    rules += _choice(r"^Which object is visible on the terrace", {
        "a": "headphones", "b": "umbrella", "c": "laptop", "d": "guitar"})
    rules += _choice(r"^What is the diver photographing", {
        "a": "manta ray", "b": "shipwreck", "c": "octopus", "d": "sea turtle"})
    rules += _choice(r"^Who examines the coral samples", {
        "a": "Characters: Narrator", "b": "Dr. Amara Osei",
        "c": "captain", "d": "volunteer"}, within="microscope")
    rules += _choice(r"^Why is the coral sample placed under the microscope", {
        "a": "bleaching damage", "b": "fish eggs", "c": "water temperature", "d": "magazine"})
    rules += _choice(r"^Where does the team go after the dive", {
        "a": "beach bar", "b": "airport", "c": "research boat", "d": "Location: fish market"})
    # No phrasing beyond the pattern pass carries a time window in this world.
    rules.append({"purpose": "time_extract", "match": ".", "reply": {"none": True}})
    return {"responses": {}, "rules": rules}


SEARCH_RESULTS = {
    "Ian Marsh filmography": [
        "Ian Marsh is a Scottish actor known for The Long Winter (2009) and Northern Line (2015).",
        "Ian Marsh plays Walter Crane in Crane Holdings.",
    ],
    "Kalani Reef location": [
        "Kalani Reef is a fringing coral reef off the coast of Hawaii in the Pacific Ocean.",
    ],
}


def write_fixtures(out_dir) -> dict[str, Path]:
    """Write manifests, datasets, scripts and a provider config under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for vid, spec in VIDEOS.items():
        p = out / f"{vid}.json"
        p.write_text(json.dumps(manifest(spec)))
        paths[f"manifest_{vid}"] = p
    for name, rows in (("questions", QUESTIONS), ("detail_questions", DETAIL_QUESTIONS)):
        p = out / f"{name}.jsonl"
        p.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
        paths[name] = p
    paths["chat_script"] = out / "chat_script.json"
    paths["chat_script"].write_text(json.dumps(chat_script(), indent=1, sort_keys=True))
    paths["search_script"] = out / "search.json"
    paths["search_script"].write_text(json.dumps(SEARCH_RESULTS, indent=1, sort_keys=True))
    paths["providers"] = out / "providers.json"
    paths["providers"].write_text(json.dumps({
        "chat": {"kind": "scripted_mock", "script_path": "chat_script.json"},
        "embedding": {"kind": "hash_mock", "dimension": 256},
        "asr": {"kind": "scripted_mock"},
        "diarizer": {"kind": "scripted_mock"},
        "detector": {"kind": "scripted_mock"},
        "search": {"kind": "scripted_mock", "script_path": "search.json"},
    }, indent=1, sort_keys=True))
    return paths
