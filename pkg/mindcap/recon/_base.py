class ReconError(Exception):
    pass
