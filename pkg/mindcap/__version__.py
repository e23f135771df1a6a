VERSION = (0, 3, 0)

__version__ = ".".join(map(str, VERSION))
__copyright__ = "(c) 2024-2026 mindcap developers"
