lexicon = {
    "nouns": [
        "architect", "engineer", "surgeon", "student", "doctor", "nurse", "farmer", "baker",
        "painter", "writer", "pilot", "sailor", "judge", "lawyer", "miner", "tailor",
        "bridge", "tower", "garden", "library", "market", "harbor", "castle", "temple",
        "report", "letter", "contract", "ledger", "engine", "vessel", "canal", "railway",
        "council", "committee", "museum", "factory", "village", "island", "theory", "treaty",
    ],
    # present (3rd person singular) and base form
    "verbs": [
        {"present": "builds", "base": "build"},
        {"present": "designs", "base": "design"},
        {"present": "funds", "base": "fund"},
        {"present": "visits", "base": "visit"},
        {"present": "repairs", "base": "repair"},
        {"present": "inspects", "base": "inspect"},
        {"present": "describes", "base": "describe"},
        {"present": "protects", "base": "protect"},
        {"present": "manages", "base": "manage"},
        {"present": "reviews", "base": "review"},
        {"present": "approves", "base": "approve"},
        {"present": "supports", "base": "support"},
        {"present": "studies", "base": "study"},
        {"present": "guards", "base": "guard"},
        {"present": "paints", "base": "paint"},
        {"present": "writes", "base": "write"},
        {"present": "owns", "base": "own"},
        {"present": "rebuilds", "base": "rebuild"},
        {"present": "finances", "base": "finance"},
        {"present": "examines", "base": "examine"},
    ],
    "adjectives": [
        "old", "new", "famous", "local", "senior", "young",
        "large", "small", "annual", "basic", "northern", "royal",
    ],
    "prepositions": ["near", "behind", "beside", "for", "with", "without"],
    "conjunctions": ["or", "and"],
    "intensifiers": ["very", "quite", "rather"],
}
