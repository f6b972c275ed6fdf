"""Rule mining, hybrid models, the active NSGA-II search and the experiment harness"""
