# 核心模块包
